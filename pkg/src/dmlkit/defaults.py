"""Documented hyperparameter defaults, read back from the code that uses them.

``hyperparameter_table()`` introspects function signatures and dataclass
defaults rather than repeating numbers, so a drifting default shows up as a
mismatch against ``DOCUMENTED``.
"""

import inspect
from dataclasses import fields

from . import batching, mining, objectives
from .objectives import _base
from .toytrain import ToyConfig

# name -> documented value
DOCUMENTED = {
    "triplet.gamma": 0.2,
    "margin.gamma": 0.2,
    "margin.beta_init": 1.2,
    "contrastive.gamma": 1.0,
    "distance_weighted.lambda_clip": 0.5,
    "distance_weighted.d_max": 1.4,
    "multisimilarity.alpha": 2.0,
    "multisimilarity.beta": 40.0,
    "multisimilarity.lambda": 0.5,
    "multisimilarity.epsilon": 0.1,
    "normsoftmax.temperature": 0.05,
    "arcface.scale": 16.0,
    "arcface.margin": 0.5,
    "histogram.bins": 65,
    "histogram.bins_few_per_class": 11,
    "ddm_frd.b_star": 1024,
    "ddm_frd.m": 8,
    "toy.hidden_width": 30,
    "toy.iterations": 200,
    "toy.batch_size": 24,
    "toy.learning_rate": 0.03,
    "toy.margin": 0.1,
    "toy.p_switch": 0.001,
    "toy.samples_per_line": 15,
}


def _arg(fn, name):
    return inspect.signature(fn).parameters[name].default


def hyperparameter_table():
    spec = objectives.ObjectiveSpec()
    toy = {f.name: f.default for f in fields(ToyConfig)}
    margins = objectives.DEFAULT_MARGINS
    kind = objectives.ObjectiveKind
    table = {
        "triplet.gamma": margins[kind.TRIPLET],
        "margin.gamma": margins[kind.MARGIN],
        "margin.beta_init": spec.beta_init,
        "contrastive.gamma": margins[kind.CONTRASTIVE],
        "distance_weighted.lambda_clip": _arg(mining.distance_weighted_miner, "lambda_clip"),
        "distance_weighted.d_max": _arg(mining.distance_weighted_miner, "d_max"),
        "multisimilarity.alpha": spec.msim_alpha,
        "multisimilarity.beta": spec.msim_beta,
        "multisimilarity.lambda": spec.msim_lambda,
        "multisimilarity.epsilon": spec.msim_epsilon,
        "normsoftmax.temperature": spec.temperature,
        "arcface.scale": spec.scale,
        "arcface.margin": spec.arc_margin,
        "histogram.bins": spec.bins,
        "histogram.bins_few_per_class": _base.HISTOGRAM_BINS_FEW_PER_CLASS,
        "ddm_frd.b_star": _arg(batching.ddm_select, "b_star"),
        "ddm_frd.m": _arg(batching.frd_select, "m"),
    }
    table.update({f"toy.{k.split('.')[-1]}": toy[k.split(".")[-1]] for k in DOCUMENTED if k.startswith("toy.")})
    return table


def table_markdown():
    rows = ["| parameter | default |", "|---|---|"]
    rows += [f"| {k} | {v} |" for k, v in hyperparameter_table().items()]
    return "\n".join(rows)
