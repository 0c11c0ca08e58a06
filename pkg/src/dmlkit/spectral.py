"""Singular-value spectra, spectral decay and embedding-density measures."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .core import as_array, as_labels

SPECTRUM_FLOOR = 1e-12


@dataclass
class SpectralReport:
    singular_values: np.ndarray
    rho: float
    per_class_spectra: dict | None = None
    mean_class_spectrum: np.ndarray | None = None
    skipped_classes: list = field(default_factory=list)

    def as_dict(self):
        return {"rho": self.rho, "n_singular_values": len(self.singular_values)}


@dataclass
class DensityReport:
    pi_intra: float
    pi_inter: float
    pi_ratio: float
    degenerate: bool = False

    def as_dict(self):
        return {"pi_intra": self.pi_intra, "pi_inter": self.pi_inter, "pi_ratio": self.pi_ratio}


def singular_spectrum(embeddings):
    x = as_array(embeddings)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need at least two embeddings")
    return np.linalg.svd(x, compute_uv=False)


def rho(spectrum, exclude_top=True):
    """KL divergence from the uniform distribution to the normalized spectrum.

    The largest singular value is dropped first (``exclude_top``); the rest are
    scaled to sum to one. Zero means a perfectly flat spectrum; larger values
    mean faster decay.
    """
    s = np.sort(np.asarray(spectrum, dtype=np.float64))[::-1]
    if len(s) < 2:
        raise ValueError("spectrum needs at least two values")
    if exclude_top:
        s = s[1:]
    total = s.sum()
    if total <= 0:
        raise ValueError("spectrum is identically zero after dropping the top value")
    p = np.maximum(s / total, SPECTRUM_FLOOR)
    u = 1.0 / len(s)
    return float(np.sum(u * np.log(u / p)))


def per_class_spectra(embeddings, labels):
    """SVD of every class with at least two members.

    Returns ``(spectra, mean_spectrum, skipped)``; the mean is taken over the
    sorted spectra truncated to the shortest one.
    """
    x = as_array(embeddings)
    y = as_labels(labels)
    spectra, skipped = {}, []
    for c in np.unique(y):
        members = x[y == c]
        if len(members) < 2:
            skipped.append(int(c))
            continue
        spectra[int(c)] = singular_spectrum(members)
    if not spectra:
        raise ValueError("no class has two or more members")
    width = min(len(s) for s in spectra.values())
    mean = np.mean([s[:width] for s in spectra.values()], axis=0)
    return spectra, mean, skipped


def spectral_report(embeddings, labels=None, per_class=False, exclude_top=True):
    s = singular_spectrum(embeddings)
    report = SpectralReport(s, rho(s, exclude_top))
    if per_class:
        if labels is None:
            raise ValueError("per-class spectra need labels")
        spectra, mean, skipped = per_class_spectra(embeddings, labels)
        report.per_class_spectra = spectra
        report.mean_class_spectrum = mean
        report.skipped_classes = skipped
    return report


def density_measures(embeddings, labels):
    """Mean within-class distance, mean distance between class means, and
    their ratio. A zero inter-class term yields ratio 0 with ``degenerate`` set."""
    x = as_array(embeddings)
    y = as_labels(labels)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("inter-class density needs at least two classes")
    intra = np.concatenate([pdist(x[y == c]) for c in classes if np.sum(y == c) >= 2] or [np.zeros(0)])
    if not intra.size:
        raise ValueError("intra-class density needs a class with two or more members")
    means = np.array([x[y == c].mean(axis=0) for c in classes])
    pi_intra = float(intra.mean())
    pi_inter = float(pdist(means).mean())
    if pi_inter > 0:
        return DensityReport(pi_intra, pi_inter, pi_intra / pi_inter)
    return DensityReport(pi_intra, pi_inter, 0.0, degenerate=True)

