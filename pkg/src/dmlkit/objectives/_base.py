from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from ..autodiff import Var
from ..core import as_array, as_labels
from ..mining import TupleSet

LOG_FLOOR = 1e-30
COS_EPS = 1e-7
PROXY_NORM_TOL = 1e-3
# Histogram resolution for datasets with many tiny classes.
HISTOGRAM_BINS_FEW_PER_CLASS = 11


class ObjectiveKind(str, Enum):
    CONTRASTIVE = "contrastive"
    TRIPLET = "triplet"
    MARGIN = "margin"
    GENLIFTED = "genlifted"
    NPAIR = "npair"
    ANGULAR = "angular"
    ARCFACE = "arcface"
    HISTOGRAM = "histogram"
    MULTISIMILARITY = "multisimilarity"
    PROXYNCA = "proxynca"
    QUADRUPLET = "quadruplet"
    SNR = "snr"
    SOFTTRIPLE = "softtriple"
    NORMSOFTMAX = "normsoftmax"
    MIXUP_TRIPLET = "mixup_triplet"


# Losses that read raw (non-normalized) embeddings; every other kind expects
# rows on the unit sphere.
RAW_INPUT = frozenset({ObjectiveKind.GENLIFTED, ObjectiveKind.NPAIR, ObjectiveKind.ANGULAR})

PROXY_KINDS = frozenset(
    {ObjectiveKind.ARCFACE, ObjectiveKind.PROXYNCA, ObjectiveKind.SOFTTRIPLE, ObjectiveKind.NORMSOFTMAX}
)


@dataclass
class ObjectiveSpec:
    """Loss identifier plus every hyperparameter the objectives read.

    ``gamma`` is the margin of whichever loss is selected; ``None`` picks that
    loss's usual default (see :data:`DEFAULT_MARGINS`).
    """

    kind: ObjectiveKind = ObjectiveKind.TRIPLET
    gamma: float | None = None
    beta_init: float = 1.2
    beta_lr: float = 0.0005
    nu: float = 0.005
    angular_alpha: float = math.pi / 4
    angular_lambda: float = 2.0
    arc_margin: float = 0.5
    scale: float = 16.0
    bins: int = 65
    msim_alpha: float = 2.0
    msim_beta: float = 40.0
    msim_lambda: float = 0.5
    msim_epsilon: float = 0.1
    quad_gamma2: float = 0.5
    snr_lambda: float = 0.005
    temperature: float = 0.05
    st_tau: float = 0.2
    st_lambda: float = 8.0
    st_delta: float = 0.01
    st_gamma: float = 0.1
    proxies_per_class: int = 2
    proxy_lr: float | None = None
    p_switch: float = 0.0

    def __post_init__(self):
        self.kind = ObjectiveKind(self.kind)
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("margins must be non-negative")
        if self.arc_margin < 0 or self.quad_gamma2 < 0 or self.st_delta < 0:
            raise ValueError("margins must be non-negative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.bins < 2:
            raise ValueError("histogram needs at least 2 bins")
        if not 0.0 <= self.p_switch <= 1.0:
            raise ValueError("p_switch must lie in [0, 1]")
        if self.proxies_per_class < 1:
            raise ValueError("proxies_per_class must be >= 1")

    @property
    def margin(self):
        return DEFAULT_MARGINS.get(self.kind, 0.0) if self.gamma is None else self.gamma

    @property
    def proxy_learning_rate(self):
        if self.proxy_lr is not None:
            return self.proxy_lr
        return DEFAULT_PROXY_LR.get(self.kind, 0.0)


DEFAULT_MARGINS = {
    ObjectiveKind.CONTRASTIVE: 1.0,
    ObjectiveKind.TRIPLET: 0.2,
    ObjectiveKind.MIXUP_TRIPLET: 0.2,
    ObjectiveKind.MARGIN: 0.2,
    ObjectiveKind.GENLIFTED: 1.0,
    ObjectiveKind.QUADRUPLET: 1.0,
    ObjectiveKind.SNR: 0.2,
}

DEFAULT_PROXY_LR = {
    ObjectiveKind.ARCFACE: 0.0005,
    ObjectiveKind.PROXYNCA: 0.0005,
    ObjectiveKind.SOFTTRIPLE: 1e-5,
    ObjectiveKind.NORMSOFTMAX: 1e-5,
}


@dataclass
class ProxyBank:
    """Class representatives, shape ``(C, P, D)``."""

    proxies: np.ndarray
    learn_rate: float = 0.0005

    def __post_init__(self):
        p = np.asarray(self.proxies, dtype=np.float64)
        if p.ndim == 2:
            p = p[:, None, :]
        if p.ndim != 3:
            raise ValueError("proxies must have shape (classes, per_class, dim)")
        self.proxies = p

    @classmethod
    def random(cls, n_classes, dim, per_class=1, seed=0, learn_rate=0.0005):
        rng = np.random.default_rng(seed)
        p = rng.standard_normal((n_classes, per_class, dim))
        p /= np.linalg.norm(p, axis=-1, keepdims=True)
        return cls(p, learn_rate)

    @property
    def n_classes(self):
        return self.proxies.shape[0]

    @property
    def rows(self):
        """The proxy tensor flattened to ``(C, D)``; only valid for one proxy per class."""
        if self.proxies.shape[1] != 1:
            raise ValueError("this loss expects exactly one proxy per class")
        return self.proxies[:, 0, :]

    def step(self, grad):
        self.proxies = self.proxies - self.learn_rate * np.asarray(grad).reshape(self.proxies.shape)
        return self


@dataclass
class LossOutput:
    value: float
    grad_embeddings: np.ndarray
    grad_proxies: np.ndarray | None = None
    grad_beta: float | None = None
    extras: dict = field(default_factory=dict)


def leaf(x):
    return Var(np.array(x, dtype=np.float64, copy=True))


def finish(loss, emb, proxies=None, beta=None, **extras):
    """Run backprop from a scalar loss Var and package the gradients."""
    if loss.requires_grad:
        loss.backward()
    out = LossOutput(
        value=float(loss.value),
        grad_embeddings=np.zeros(emb.shape) if emb.grad is None else emb.grad,
    )
    if proxies is not None:
        out.grad_proxies = np.zeros(proxies.shape) if proxies.grad is None else proxies.grad
    if beta is not None:
        out.grad_beta = 0.0 if beta.grad is None else float(beta.grad)
    out.extras.update(extras)
    return out


def zero_output(x, proxies=None, with_beta=False):
    return LossOutput(
        0.0,
        np.zeros(x.shape),
        None if proxies is None else np.zeros(np.shape(proxies)),
        0.0 if with_beta else None,
    )


def prepare(batch, labels):
    x = as_array(batch)
    if x.ndim != 2:
        raise ValueError("batch must be an n x D matrix")
    y = as_labels(labels)
    if len(y) != len(x):
        raise ValueError(f"{len(y)} labels for {len(x)} embeddings")
    return x, y


def coerce_tuples(tuples, kind):
    if isinstance(tuples, TupleSet):
        if tuples.kind != kind:
            raise ValueError(f"expected {kind}, got {tuples.kind}")
        return tuples
    return TupleSet(kind, np.asarray(tuples, dtype=np.int64))


def check_range(idx, n):
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError("tuple index out of range")


def check_proxy_labels(y, n_classes):
    if n_classes < 2:
        raise ValueError("proxy losses need at least two classes")
    if y.size and y.max() >= n_classes:
        raise ValueError(f"no proxy for class {int(y.max())}")


def check_unit_proxies(p):
    norms = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norms - 1.0) > PROXY_NORM_TOL):
        raise ValueError("proxies must be unit-normalized")
