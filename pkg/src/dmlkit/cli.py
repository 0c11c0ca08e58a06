"""Command-line driver: ``dmlkit {toy,analyze,eval,sample}``.

Exit codes: 0 when every output was written, 2 for unreadable inputs (bad
dump files, bad config files, bad flags), 1 when a command's preconditions
fail on otherwise valid input.
"""

import argparse
import sys
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import batching, io
from .core import NORM_TOL
from .evaluation import DEFAULT_KS, evaluate
from .objectives import ObjectiveSpec
from .spectral import density_measures, spectral_report
from .toytrain import ToyConfig, train_toy

SAMPLERS = ("spc2", "spc4", "spc8", "spcr", "gc", "ddm", "frd")
MINERS = ("random", "semihard", "softhard", "distance")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Parsed ``key = value`` run configuration.

    Keys are ``objective.<field>`` (any :class:`ObjectiveSpec` field),
    ``toy.<field>`` (any :class:`ToyConfig` field), ``sampler``, ``miner`` and
    ``seeds`` (comma separated). Blank lines and ``#`` comments are ignored.
    Anything not set keeps the library default.
    """

    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    toy: ToyConfig = field(default_factory=ToyConfig)
    sampler: str = "spc2"
    miner: str = "distance"
    seeds: list = field(default_factory=lambda: [0])

    @classmethod
    def parse(cls, text, source="<config>"):
        objective, toy, top = {}, {}, {}
        targets = {"objective": (ObjectiveSpec, objective), "toy": (ToyConfig, toy)}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue

            def fail(msg):
                raise ConfigError(f"{source}:{lineno}: {msg}")

            if "=" not in line:
                fail(f"expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            section, _, name = key.partition(".")
            if section in targets and name:
                owner, bucket = targets[section]
                types_ = {f.name: f.type for f in fields(owner)}
                if name not in types_:
                    fail(f"unknown key {key!r}")
                try:
                    bucket[name] = _convert(value, types_[name])
                except ValueError as exc:
                    fail(f"bad value for {key!r}: {exc}")
            elif key == "sampler":
                if value not in SAMPLERS:
                    fail(f"sampler must be one of {', '.join(SAMPLERS)}")
                top["sampler"] = value
            elif key == "miner":
                if value not in MINERS:
                    fail(f"miner must be one of {', '.join(MINERS)}")
                top["miner"] = value
            elif key == "seeds":
                try:
                    top["seeds"] = parse_int_list(value)
                except ValueError as exc:
                    fail(str(exc))
            else:
                fail(f"unknown key {key!r}")
        try:
            return cls(ObjectiveSpec(**objective), ToyConfig(**toy), **top)
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.parse(text, str(path))


def _convert(value, annotation):
    options = typing.get_args(annotation) if isinstance(annotation, types.UnionType) else (annotation,)
    if type(None) in options and value.lower() == "none":
        return None
    kind = next(t for t in options if t is not type(None))
    if isinstance(kind, type) and issubclass(kind, str):
        return kind(value)
    if kind is bool:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is int:
        return int(value)
    return float(value)


def parse_int_list(text):
    try:
        out = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise ValueError("empty integer list")
    return out


def _unique(values):
    return list(dict.fromkeys(values))


def _print_pairs(pairs, out):
    for k, v in pairs.items():
        out.write(f"{k}={v:.10g}\n" if isinstance(v, float) else f"{k}={v}\n")


# commands ---------------------------------------------------------------------


def _write_toy_run(result, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_trace_csv(out_dir / "trace.csv", result.trace)
    io.write_spectrum_csv(out_dir / "spectrum.csv", result.spectral.singular_values)
    text = result.metrics.to_text() + f"rho={result.spectral.rho:.10g}\n"
    (out_dir / "metrics.txt").write_text(text)
    (out_dir / "embed_train.svg").write_text(
        io.scatter_svg(result.train_embeddings, result.train[1], "train")
    )
    (out_dir / "embed_test.svg").write_text(io.scatter_svg(result.test_embeddings, result.test[1], "test"))
    snaps = out_dir / "snapshots"
    snaps.mkdir(exist_ok=True)
    for it, (emb_tr, emb_te) in sorted(result.snapshots.items()):
        io.write_dump(snaps / f"iter{it:05d}_train.dmle", emb_tr, result.train[1])
        io.write_dump(snaps / f"iter{it:05d}_test.dmle", emb_te, result.test[1])


def cmd_toy(args, out=sys.stdout):
    config = RunConfig.load(args.config) if args.config else RunConfig()
    seeds = _unique(args.seeds if args.seeds is not None else config.seeds)
    root = Path(args.out)
    for seed in seeds:
        result = train_toy(replace(config.toy, seed=seed), regularized=args.regularized)
        target = root / f"seed{seed}" if len(seeds) > 1 else root
        _write_toy_run(result, target)
        out.write(f"seed={seed} recall@1={result.metrics.recall_at[1]:.10g} rho={result.spectral.rho:.10g}\n")
    return 0


def cmd_analyze(args, out=sys.stdout):
    dump = io.load_embeddings(args.dump)
    if args.per_class and dump.labels is None:
        raise ValueError("--per-class needs a dump with labels")
    x = dump.data.astype(np.float64)
    report = spectral_report(x, dump.labels, per_class=args.per_class)
    pairs = {"n": dump.n, "d": dump.d, **report.as_dict()}
    if dump.labels is not None:
        try:
            pairs.update(density_measures(x, dump.labels).as_dict())
        except ValueError as exc:
            pairs["density"] = f"unavailable ({exc})"
    if args.per_class:
        pairs["classes_skipped"] = len(report.skipped_classes)
    _print_pairs(pairs, out)
    target = Path(args.spectrum_out) if args.spectrum_out else Path(args.dump).with_suffix(".spectrum.csv")
    io.write_spectrum_csv(target, report.singular_values, report.mean_class_spectrum)
    return 0


def cmd_eval(args, out=sys.stdout):
    dump = io.load_embeddings(args.dump)
    if dump.labels is None:
        raise ValueError("evaluation needs a dump with labels")
    ks = _unique(k for group in (args.k or [list(DEFAULT_KS)]) for k in group)
    bad = [k for k in ks if k < 1 or k >= dump.n]
    if bad:
        raise ValueError(f"k must satisfy 1 <= k < n = {dump.n}; got {bad}")
    report = evaluate(dump.data.astype(np.float64), dump.labels, ks=ks, seed=args.seed)
    out.write(report.to_text())
    return 0


def _bank(dump):
    x = dump.data.astype(np.float64)
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > NORM_TOL):
        raise ValueError("embedded samplers need unit-normalized embeddings")
    return batching.MemoryBank.from_embeddings(x, dump.labels)


def select_batch(dump, strategy, b, m=batching.DEFAULT_CANDIDATES, seed=0, b_star=batching.DEFAULT_B_STAR):
    if dump.labels is None:
        raise ValueError("sampling needs a dump with labels")
    if strategy in ("spc2", "spc4", "spc8"):
        return batching.spc_sampler(dump.labels, b, int(strategy[3:]), seed)
    if strategy == "spcr":
        return batching.spc_r_sampler(dump.labels, b, seed)
    if strategy == "gc":
        return batching.gc_select(_bank(dump), b, seed, b_star)
    if strategy == "ddm":
        return batching.ddm_select(_bank(dump), b, m, seed, b_star)
    if strategy == "frd":
        return batching.frd_select(_bank(dump), b, m, seed, b_star)
    raise ValueError(f"unknown strategy {strategy!r}")


def cmd_sample(args, out=sys.stdout):
    dump = io.load_embeddings(args.dump)
    batch = select_batch(dump, args.strategy, args.b, args.m, args.seed, args.b_star)
    out.write("".join(f"{i}\n" for i in batch.indices))
    return 0


# parser -------------------------------------------------------------------------


def _int_list(text):
    try:
        return parse_int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(prog="dmlkit", description="Metric-learning diagnostics and toy runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    toy = sub.add_parser("toy", help="train the 2-D toy network")
    toy.add_argument("config", nargs="?", help="key = value run config (defaults if omitted)")
    toy.add_argument("--regularized", action="store_true", help="switch tuple roles with p_switch")
    toy.add_argument("--seeds", type=_int_list, help="comma-separated seeds; overrides the config")
    toy.add_argument("--out", default="toy_out", help="output directory")
    toy.set_defaults(func=cmd_toy)

    analyze = sub.add_parser("analyze", help="spectral decay and density of a dump")
    analyze.add_argument("dump")
    analyze.add_argument("--per-class", action="store_true")
    analyze.add_argument("--spectrum-out", help="CSV path (default: next to the dump)")
    analyze.set_defaults(func=cmd_analyze)

    ev = sub.add_parser("eval", help="retrieval and clustering metrics of a dump")
    ev.add_argument("dump")
    ev.add_argument("--k", type=_int_list, action="append", help="recall cut-offs, e.g. 1,2,4,8")
    ev.add_argument("--seed", type=int, default=0, help="k-means seed")
    ev.set_defaults(func=cmd_eval)

    sample = sub.add_parser("sample", help="pick a mini-batch from a dump")
    sample.add_argument("dump")
    sample.add_argument("--strategy", choices=SAMPLERS, required=True)
    sample.add_argument("--b", type=int, required=True)
    sample.add_argument("--m", type=int, default=batching.DEFAULT_CANDIDATES)
    sample.add_argument("--b-star", type=int, default=batching.DEFAULT_B_STAR)
    sample.add_argument("--seed", type=int, default=0)
    sample.set_defaults(func=cmd_sample)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (io.DumpFormatError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
