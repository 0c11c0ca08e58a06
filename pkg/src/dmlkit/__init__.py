"""Deep metric learning toolkit: objectives, tuple mining, batch sampling,
retrieval metrics, spectral diagnostics and a 2-D toy trainer, in numpy."""

from .core import EmbeddingMatrix, LabelVector, normalize_rows, pairwise_distances
from .evaluation import MetricReport, evaluate
from .objectives import ObjectiveKind, ObjectiveSpec, compute_loss
from .spectral import SpectralReport, density_measures, rho, spectral_report
from .toytrain import ToyConfig, train_toy

__version__ = "0.1.0"

__all__ = [
    "EmbeddingMatrix",
    "LabelVector",
    "MetricReport",
    "ObjectiveKind",
    "ObjectiveSpec",
    "SpectralReport",
    "ToyConfig",
    "compute_loss",
    "density_measures",
    "evaluate",
    "normalize_rows",
    "pairwise_distances",
    "rho",
    "spectral_report",
    "train_toy",
]
