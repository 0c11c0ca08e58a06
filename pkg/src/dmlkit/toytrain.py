"""Two-dimensional toy problem: a small MLP whose output lies on the unit
circle, trained with a contrastive loss, with or without tuple switching.

Training lines and test lines are arranged so that the test classes can only
be told apart by a direction of the input that the training labels never
reward.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autodiff as ad
from .evaluation import MetricReport, evaluate
from .mining import all_pairs, rho_regularize_tuples
from .objectives import contrastive_loss
from .spectral import SpectralReport, spectral_report

VARIANTS = ("diagonal", "axis")
ACTIVATIONS = {"relu": ad.relu}


@dataclass(frozen=True)
class ToyConfig:
    hidden_width: int = 30
    layers: int = 2
    input_dim: int = 2
    output_dim: int = 2
    iterations: int = 200
    batch_size: int = 24
    learning_rate: float = 0.03
    margin: float = 0.1
    p_switch: float = 0.001
    samples_per_line: int = 15
    seed: int = 0
    variant: str = "diagonal"
    line_spacing: float = 0.6
    snapshot_every: int = 20

    def __post_init__(self):
        for name in ("hidden_width", "layers", "input_dim", "output_dim", "iterations", "batch_size", "snapshot_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.margin < 0 or self.line_spacing <= 0:
            raise ValueError("learning_rate and line_spacing must be positive, margin non-negative")
        if not 0.0 <= self.p_switch <= 1.0:
            raise ValueError("p_switch must lie in [0, 1]")
        if self.samples_per_line < 2:
            raise ValueError("samples_per_line must be >= 2")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


# data --------------------------------------------------------------------------


def _segment(start, end, t):
    start, end = np.asarray(start, float), np.asarray(end, float)
    return start + t[:, None] * (end - start)


def generate_toy_lines(variant="diagonal", samples_per_line=15, seed=0, spacing=0.6):
    """Four training and four test line segments, one class per segment.

    ``axis``: vertical training lines (told apart by x only) and horizontal
    test lines (told apart by y only). ``diagonal``: training lines run along
    (1, 1) and are told apart by x - y; the test lines are the four sides of a
    square, and the top/left and bottom/right sides coincide in x - y.

    Returns ``((x_train, y_train), (x_test, y_test))``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if samples_per_line < 2:
        raise ValueError("samples_per_line must be >= 2")
    rng = np.random.default_rng(seed)
    offsets = spacing * np.array([-1.5, -0.5, 0.5, 1.5])

    def t():
        return np.sort(rng.uniform(0.0, 1.0, samples_per_line))

    if variant == "axis":
        train = [_segment((c, -1.0), (c, 1.0), t()) for c in offsets]
        test = [_segment((-1.0, c), (1.0, c), t()) for c in offsets]
    else:
        r2 = np.sqrt(0.5)
        train = []
        for c in offsets:
            center = c * np.array([r2, -r2])
            along = np.array([r2, r2])
            train.append(_segment(center - along, center + along, t()))
        h, w = 0.6, 0.4
        sides = [((-w, h), (w, h)), ((-h, -w), (-h, w)), ((-w, -h), (w, -h)), ((h, -w), (h, w))]
        test = [_segment(a, b, t()) for a, b in sides]
    labels = np.repeat(np.arange(4), samples_per_line)
    return (np.concatenate(train), labels), (np.concatenate(test), labels.copy())


# network -----------------------------------------------------------------------


@dataclass
class MlpState:
    """Weights and biases of a fully connected ReLU network."""

    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def copy(self):
        return MlpState([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def parameters(self):
        return [*self.weights, *self.biases]

    def with_parameters(self, params):
        k = len(self.weights)
        return MlpState([np.array(p) for p in params[:k]], [np.array(p) for p in params[k:]], self.activation)


def init_mlp(config, rng=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    widths = [config.input_dim] + [config.hidden_width] * config.layers + [config.output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return MlpState(weights, biases)


def _hidden(h, params, n_layers, activation):
    act = ACTIVATIONS[activation]
    for i, (w, b) in enumerate(zip(params[:n_layers], params[n_layers:])):
        h = h @ w + b
        if i < n_layers - 1:
            h = act(h)
    return h


def _forward_graph(params, inputs, n_layers, activation="relu"):
    h = _hidden(ad.Var(np.asarray(inputs, dtype=np.float64), requires_grad=False), params, n_layers, activation)
    norms = ad.row_norms(h)
    if np.any(norms.value == 0):
        raise ValueError("network output is the zero vector and cannot be normalized")
    return h / norms.reshape(-1, 1)


def mlp_forward(state, inputs):
    params = [ad.Var(p, requires_grad=False) for p in state.parameters()]
    return _forward_graph(params, inputs, len(state.weights), state.activation).value


def mlp_jacobian(state, inputs):
    """Jacobian of the normalized output w.r.t. each input row, shape (n, out, in)."""
    x = np.asarray(inputs, dtype=np.float64)
    params = [ad.Var(p, requires_grad=False) for p in state.parameters()]
    out_dim = state.weights[-1].shape[1]
    jac = np.zeros((len(x), out_dim, x.shape[1]))
    for k in range(out_dim):
        inp = ad.Var(x)
        h = _hidden(inp, params, len(state.weights), state.activation)
        out = h / ad.row_norms(h).reshape(-1, 1)
        seed = np.zeros(out.shape)
        seed[:, k] = 1.0
        out.backward(seed)
        jac[:, k, :] = inp.grad
    return jac


def loss_and_gradient(state, inputs, labels, pairs, margin):
    """Contrastive loss of the network on ``inputs`` and its parameter gradient."""
    params = [ad.Var(p) for p in state.parameters()]
    emb = _forward_graph(params, inputs, len(state.weights), state.activation)
    out = contrastive_loss(emb.value, labels, pairs, gamma=margin)
    emb.backward(out.grad_embeddings)
    grads = [np.zeros_like(p.value) if p.grad is None else p.grad for p in params]
    return out.value, grads


# training ----------------------------------------------------------------------


@dataclass
class ToyResult:
    state: MlpState
    trace: list
    snapshots: dict
    spectral: SpectralReport
    metrics: MetricReport
    train: tuple
    test: tuple
    train_embeddings: np.ndarray
    test_embeddings: np.ndarray
    config: ToyConfig = field(default=None)


def toy_rho(embeddings):
    """Spectral decay for the toy's 2-D embeddings.

    With two singular values, dropping the top one leaves a single value and a
    decay of zero no matter what, so the full spectrum is used here.
    """
    return spectral_report(embeddings, exclude_top=False)


def train_toy(config=ToyConfig(), regularized=False):
    (x_tr, y_tr), (x_te, y_te) = generate_toy_lines(
        config.variant, config.samples_per_line, config.seed, config.line_spacing
    )
    init_seq, batch_seq, switch_seq = np.random.SeedSequence(config.seed).spawn(3)
    state = init_mlp(config, np.random.default_rng(init_seq))
    batch_rng = np.random.default_rng(batch_seq)
    switch_rng = np.random.default_rng(switch_seq)
    b = min(config.batch_size, len(x_tr))

    trace, snapshots = [], {}

    def log(it, loss):
        emb = mlp_forward(state, x_tr)
        trace.append((it, float(loss), toy_rho(emb).rho))
        snapshots[it] = (emb, mlp_forward(state, x_te))

    for it in range(config.iterations):
        idx = batch_rng.choice(len(x_tr), size=b, replace=False)
        pairs = all_pairs(y_tr[idx])
        if regularized:
            pairs = rho_regularize_tuples(
                pairs, y_tr[idx], config.p_switch, int(switch_rng.integers(2**63))
            )
        loss, grads = loss_and_gradient(state, x_tr[idx], y_tr[idx], pairs, config.margin)
        if not np.isfinite(loss):
            raise FloatingPointError(f"loss diverged at iteration {it}")
        if it % config.snapshot_every == 0:
            log(it, loss)
        state = state.with_parameters(
            [p - config.learning_rate * g for p, g in zip(state.parameters(), grads)]
        )
    final_loss, _ = loss_and_gradient(state, x_tr, y_tr, all_pairs(y_tr), config.margin)
    log(config.iterations, final_loss)

    emb_tr = mlp_forward(state, x_tr)
    emb_te = mlp_forward(state, x_te)
    return ToyResult(
        state=state,
        trace=trace,
        snapshots=snapshots,
        spectral=toy_rho(emb_tr),
        metrics=evaluate(emb_te, y_te, ks=(1, 2, 4, 8), seed=config.seed),
        train=(x_tr, y_tr),
        test=(x_te, y_te),
        train_embeddings=emb_tr,
        test_embeddings=emb_te,
        config=config,
    )


def with_overrides(config, **overrides):
    return replace(config, **overrides)
