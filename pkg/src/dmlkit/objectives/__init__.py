"""Training objectives with analytic gradients.

Every loss returns a :class:`LossOutput` holding the value and the gradient
with respect to the batch embeddings (plus proxies or the margin boundary
where the loss has them). :func:`compute_loss` dispatches on an
:class:`ObjectiveSpec` and enforces each loss's normalization regime.
"""

from ..core import EmbeddingMatrix
from ._base import (
    DEFAULT_MARGINS,
    PROXY_KINDS,
    RAW_INPUT,
    LossOutput,
    ObjectiveKind,
    ObjectiveSpec,
    ProxyBank,
)
from .batchwise import (
    angular_coefficients,
    angular_loss,
    generalized_lifted_loss,
    histogram_loss,
    multisimilarity_loss,
    npair_loss,
)
from .proxy import (
    arcface_logits,
    arcface_loss,
    normalized_softmax_loss,
    proxynca_loss,
    softtriple_loss,
    softtriple_similarity,
)
from .ranking import (
    contrastive_loss,
    margin_loss,
    mixup_batch,
    mixup_triplet_loss,
    quadruplet_loss,
    snr_distance,
    snr_loss,
    triplet_loss,
)

__all__ = [
    "DEFAULT_MARGINS",
    "LossOutput",
    "ObjectiveKind",
    "ObjectiveSpec",
    "ProxyBank",
    "angular_coefficients",
    "angular_loss",
    "arcface_logits",
    "arcface_loss",
    "compute_loss",
    "contrastive_loss",
    "generalized_lifted_loss",
    "histogram_loss",
    "margin_loss",
    "mixup_batch",
    "mixup_triplet_loss",
    "multisimilarity_loss",
    "normalized_softmax_loss",
    "npair_loss",
    "proxynca_loss",
    "quadruplet_loss",
    "snr_distance",
    "snr_loss",
    "softtriple_loss",
    "softtriple_similarity",
    "triplet_loss",
]


def compute_loss(spec, batch, labels, tuples=None, proxies=None, beta=None):
    """Evaluate the loss named by ``spec`` on ``batch``.

    ``batch`` must be an :class:`EmbeddingMatrix`. Losses that expect points
    on the unit sphere reject matrices not flagged as normalized. For the
    mixup triplet, ``labels`` and ``tuples`` are sequences (one per label
    entry) and ``beta`` carries the mixup weights.
    """
    if not isinstance(batch, EmbeddingMatrix):
        raise TypeError("compute_loss expects an EmbeddingMatrix")
    kind = spec.kind
    if kind not in RAW_INPUT and not batch.normalized:
        raise ValueError(f"{kind.value} loss expects unit-normalized embeddings")
    if kind in PROXY_KINDS and proxies is None:
        raise ValueError(f"{kind.value} loss needs a proxy bank")
    x, g = batch.data, spec.margin
    K = ObjectiveKind
    if kind is K.CONTRASTIVE:
        return contrastive_loss(x, labels, tuples, gamma=g)
    if kind is K.TRIPLET:
        return triplet_loss(x, labels, tuples, gamma=g)
    if kind is K.MARGIN:
        return margin_loss(x, labels, tuples, beta=spec.beta_init if beta is None else beta, gamma=g)
    if kind is K.GENLIFTED:
        return generalized_lifted_loss(x, labels, gamma=g, nu=spec.nu)
    if kind is K.NPAIR:
        return npair_loss(x, labels, nu=spec.nu)
    if kind is K.ANGULAR:
        return angular_loss(x, labels, alpha=spec.angular_alpha, lam=spec.angular_lambda, nu=spec.nu)
    if kind is K.ARCFACE:
        return arcface_loss(x, labels, proxies, margin=spec.arc_margin, scale=spec.scale)
    if kind is K.HISTOGRAM:
        return histogram_loss(x, labels, bins=spec.bins)
    if kind is K.MULTISIMILARITY:
        return multisimilarity_loss(
            x, labels, spec.msim_alpha, spec.msim_beta, spec.msim_lambda, spec.msim_epsilon
        )
    if kind is K.PROXYNCA:
        return proxynca_loss(x, labels, proxies)
    if kind is K.QUADRUPLET:
        return quadruplet_loss(x, labels, tuples, gamma1=g, gamma2=spec.quad_gamma2)
    if kind is K.SNR:
        return snr_loss(x, labels, tuples, gamma=g, lam=spec.snr_lambda)
    if kind is K.SOFTTRIPLE:
        return softtriple_loss(
            x, labels, proxies, spec.st_tau, spec.st_lambda, spec.st_delta, spec.st_gamma
        )
    if kind is K.NORMSOFTMAX:
        return normalized_softmax_loss(x, labels, proxies, spec.temperature)
    if kind is K.MIXUP_TRIPLET:
        return mixup_triplet_loss(x, labels, tuples, beta, gamma=g)
    raise ValueError(f"unhandled objective {kind}")
