"""Command-line interface: ``setplay-fcm {parse,cluster,generate,sweep}``.

Exit codes: 0 success, 1 input error, 2 config error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import FamilySpec, generate_named_corpus, reference_specs
from .fcm import COLUMN_TOL
from .formats import (FormatError, atomic_write, dataset_to_json, dumps_json, fs_curve_csv,
                      load_dataset, partition_csv)
from .model import SetplayError, extract_features, extract_setplay
from .pipeline import PipelineConfig, run_pipeline, stage1
from .sexpr import SExprError, loads

log = logging.getLogger("setplay_fcm")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3
SEED_ENV = "SETPLAY_SEED"
SETPLAY_SUFFIXES = (".sp", ".lisp", ".sexp", ".setplay")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


class InvariantViolation(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# parse


def collect_inputs(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file() and f.suffix in SETPLAY_SUFFIXES))
        elif p.is_file():
            files.append(p)
        else:
            raise CliError(f"{p}: no such file or directory", EXIT_INPUT)
    return files


def parse_files(files):
    rows, extras, errors = [], [], []
    for f in files:
        try:
            sp = extract_setplay(loads(f.read_text(encoding="utf-8")))
        except SExprError as exc:
            errors.append(f"{f}:{exc.span[0]}:{exc.span[1]}: {exc}")
            continue
        except SetplayError as exc:
            errors.append(f"{f}: {exc}")
            continue
        except UnicodeDecodeError as exc:
            errors.append(f"{f}: not UTF-8 text ({exc.reason})")
            continue
        rows.append(extract_features(sp))
        extras.append({"id": sp.id, "source": str(f)})
    return rows, extras, errors


def cmd_parse(args) -> int:
    files = collect_inputs(args.paths)
    if not files:
        log.warning("no setplay files found; writing an empty dataset")
    rows, extras, errors = parse_files(files)
    for e in errors:
        print(e, file=sys.stderr)
    if errors:
        return EXIT_INPUT
    atomic_write(args.output, dataset_to_json(rows, extras))
    log.info("wrote %d setplays to %s", len(rows), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# cluster / sweep


_FLAG_FIELDS = {
    "c1_min": "c1_min", "c1_max": "c1_max", "c2": "c2", "m": "m", "alpha": "alpha", "gamma": "gamma",
    "restarts": "restarts", "seed": "seed", "split_fs_threshold": "split_fs_threshold",
    "normalize": "normalize", "max_iters": "max_iters", "epsilon": "epsilon",
    "penalty": "unmatched_player_penalty",
}


def build_config(args, base: dict | None = None) -> PipelineConfig:
    values = dict(base or {})
    if getattr(args, "config", None):
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_CONFIG) from None
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if os.environ.get(SEED_ENV):
        try:
            values["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise CliError(f"{SEED_ENV} must be an integer", EXIT_CONFIG) from None
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise CliError(f"unknown config fields: {', '.join(unknown)}", EXIT_CONFIG)
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from None


def _load(path):
    try:
        return load_dataset(path)
    except (OSError, FormatError) as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _check_partition(mu: np.ndarray):
    mu = np.asarray(mu)
    if np.any(np.abs(mu.sum(axis=0) - 1) > COLUMN_TOL) or mu.min() < 0 or mu.max() > 1:
        raise InvariantViolation("stage-one partition is not column-stochastic")


def cmd_cluster(args) -> int:
    manifest_in = None
    if args.manifest:
        manifest_in = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        cfg = build_config(args, manifest_in["config"])
        dataset_path = args.dataset or manifest_in["input_paths"][0]
    else:
        cfg = build_config(args)
        dataset_path = args.dataset
    if dataset_path is None:
        raise CliError("a dataset path (or --manifest) is required", EXIT_INPUT)
    dataset = _load(dataset_path)
    if len(dataset) < cfg.c1_min:
        raise CliError(f"{dataset_path}: {len(dataset)} setplays, need at least c1_min={cfg.c1_min}",
                       EXIT_INPUT)
    out = Path(args.out_dir)
    started = _now()
    s1, gd, rep = run_pipeline(dataset, cfg)
    _check_partition(s1.partition.mu)
    names = [x.name or str(j) for j, x in enumerate(dataset)]
    atomic_write(out / "report.json", dumps_json(rep))
    atomic_write(out / "fs_curve.csv", fs_curve_csv(s1.sweep))
    atomic_write(out / "partition_stage1.csv", partition_csv(s1.partition, names))
    manifest = {
        "tool": "setplay-fcm",
        "version": __version__,
        "command": "cluster",
        "input_paths": [str(dataset_path)],
        "input_sha256": {str(dataset_path): _sha256(dataset_path)},
        "config": dataclasses.asdict(cfg),
        "seeds": {str(c): [r.seed for r in e.runs] for c, e in sorted(s1.sweep.items())},
        "outputs": ["report.json", "fs_curve.csv", "partition_stage1.csv"],
        "started": started,
        "finished": _now(),
    }
    atomic_write(out / "manifest.json", dumps_json(manifest))
    log.info("best C = %d (FS %.4f); outputs in %s", s1.best_c, s1.fs_by_c[s1.best_c], out)
    return EXIT_OK


def _tag(v: float) -> str:
    return f"{v:g}"


def cmd_sweep(args) -> int:
    for m in args.m_values:
        if not m > 1:
            raise CliError(f"fuzzifier m must be > 1, got {m}", EXIT_CONFIG)
    for a in args.alpha_values:
        if not a >= 0:
            raise CliError(f"alpha must be >= 0, got {a}", EXIT_CONFIG)
    base = build_config(args)
    dataset = _load(args.dataset)
    out = Path(args.out_dir)
    written = []
    for m in args.m_values:
        for a in args.alpha_values:
            cfg = dataclasses.replace(base, m=m, alpha=a)
            s1 = stage1(dataset, cfg)
            name = f"fs_curve_m{_tag(m)}_a{_tag(a)}.csv"
            atomic_write(out / name, fs_curve_csv(s1.sweep))
            written.append({"m": m, "alpha": a, "file": name, "best_c": s1.best_c})
    atomic_write(out / "manifest.json", dumps_json({
        "tool": "setplay-fcm", "version": __version__, "command": "sweep",
        "input_paths": [str(args.dataset)], "input_sha256": {str(args.dataset): _sha256(args.dataset)},
        "config": dataclasses.asdict(base), "grid": written, "finished": _now(),
    }))
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate


def load_corpus_spec(path) -> tuple[list[FamilySpec], dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read corpus spec {path}: {exc}", EXIT_CONFIG) from None
    families = doc.get("families")
    if not isinstance(families, list) or not families:
        raise CliError("corpus spec needs a non-empty 'families' list", EXIT_CONFIG)
    defaults = {k: v for k, v in doc.items() if k != "families"}
    allowed = {f.name for f in dataclasses.fields(FamilySpec)}
    specs = []
    for i, fam in enumerate(families):
        values = {**defaults, **fam}
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise CliError(f"families[{i}]: unknown fields {', '.join(unknown)}", EXIT_CONFIG)
        for key in ("players_range", "steps_range", "opponents_range"):
            if key in values:
                values[key] = tuple(values[key])
        try:
            specs.append(FamilySpec(**values))
        except (TypeError, ValueError) as exc:
            raise CliError(f"families[{i}]: {exc}", EXIT_CONFIG) from None
    return specs, doc


def cmd_generate(args) -> int:
    if args.spec:
        specs, _ = load_corpus_spec(args.spec)
    elif args.reference_corpus:
        seed = int(os.environ.get(SEED_ENV) or args.seed or 0)
        specs = reference_specs(seed, jitter=args.jitter)
    else:
        raise CliError("give a corpus spec file or --reference-corpus", EXIT_CONFIG)
    out = Path(args.out_dir)
    corpus = generate_named_corpus(specs)
    for name, text in corpus:
        atomic_write(out / f"{name}.sp", text)
    echo = {"families": [dataclasses.asdict(s) for s in specs], "files": [f"{n}.sp" for n, _ in corpus]}
    atomic_write(out / "corpus_spec.json", dumps_json(echo))
    log.info("wrote %d setplays to %s", len(corpus), out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_pipeline_flags(p: argparse.ArgumentParser, sweep: bool = False):
    p.add_argument("--config", help="JSON file of pipeline settings (flags override it)")
    p.add_argument("--c1-min", type=int)
    p.add_argument("--c1-max", type=int)
    p.add_argument("--c2", type=int)
    if not sweep:
        p.add_argument("--m", type=float, help="fuzzifier (> 1)")
        p.add_argument("--alpha", type=float, help="fuzzy silhouette exponent")
    p.add_argument("--gamma", type=float, help="membership flexibility in [0, 1]")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int, help=f"base seed ({SEED_ENV} overrides)")
    p.add_argument("--split-fs-threshold", type=float)
    p.add_argument("--normalize", action="store_true", default=None,
                   help="scale scalar features by their range in the dataset")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--penalty", type=float, help="distance charged per unmatched player (m)")
    p.add_argument("--out-dir", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setplay-fcm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="extract the feature dataset from setplay files")
    p.add_argument("paths", nargs="+", help="setplay files or directories of *.sp files")
    p.add_argument("-o", "--output", default="dataset.json")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("cluster", help="run the two-stage clustering on a dataset")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--manifest", help="rerun with the config and input recorded in a manifest")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("generate", help="write a synthetic setplay corpus")
    p.add_argument("spec", nargs="?", help="JSON corpus spec with a 'families' list")
    p.add_argument("--reference-corpus", action="store_true", help="18 plans in 4 play-mode families")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--out-dir", default="corpus")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", help="stage-one FS curves over a grid of m and alpha")
    p.add_argument("dataset")
    p.add_argument("--m-values", type=float, nargs="+", default=[1.5, 2.0])
    p.add_argument("--alpha-values", type=float, nargs="+", default=[1.0, 2.0])
    _add_pipeline_flags(p, sweep=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
