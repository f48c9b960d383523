"""On-disk formats: the dataset and report JSON files plus the curve and partition CSVs.

Dataset field names follow the schema tables (``ourPlayersNumber`` ...).
Input-derived reals are written with full precision so a dataset reloads to
exactly the in-memory features; computed values (memberships, scores) are
rounded to nine significant digits in reports and nine decimals in CSVs.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import BoolTree, SetplayFeatures, StepFeatures

DATASET_FORMAT = "setplay-dataset"
DATASET_VERSION = 1


class FormatError(ValueError):
    pass


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# dataset


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def step_to_dict(s: StepFeatures) -> dict:
    return {
        "ourPlayersInStep": _num(s.our_players_in_step),
        "theirPlayersInStep": _num(s.their_players_in_step),
        "waitTime": float(s.wait_time),
        "abortTime": float(s.abort_time),
        "ourPlayersList": [[float(x), float(y)] for x, y in s.our_players_list],
        "theirPlayersList": [[float(x), float(y)] for x, y in s.their_players_list],
        "nextStep": _num(s.next_step),
        "condition": s.condition.to_dict(),
        "behaviorsList": list(s.behaviors_list),
    }


def setplay_to_dict(x: SetplayFeatures, extra: dict | None = None) -> dict:
    d = {"name": x.name}
    d.update(extra or {})
    d.update({
        "ourPlayersNumber": _num(x.our_players_number),
        "theirPlayersNumber": _num(x.their_players_number),
        "abortCondition": x.abort_condition.to_dict(),
        "steps": _num(x.steps_count),
        "stepsList": [step_to_dict(s) for s in x.steps_list],
    })
    return d


def _points(rows, where) -> tuple:
    try:
        return tuple((float(x), float(y)) for x, y in rows)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: expected a list of [x, y] pairs") from None


def step_from_dict(d: dict, where: str = "step") -> StepFeatures:
    try:
        return StepFeatures(
            our_players_in_step=d["ourPlayersInStep"],
            their_players_in_step=d["theirPlayersInStep"],
            wait_time=float(d["waitTime"]),
            abort_time=float(d["abortTime"]),
            our_players_list=_points(d["ourPlayersList"], f"{where}.ourPlayersList"),
            their_players_list=_points(d["theirPlayersList"], f"{where}.theirPlayersList"),
            next_step=d["nextStep"],
            condition=BoolTree.from_dict(d["condition"]),
            behaviors_list=tuple(str(b) for b in d["behaviorsList"]),
        )
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None


def setplay_from_dict(d: dict, where: str = "setplay") -> SetplayFeatures:
    try:
        steps = tuple(step_from_dict(s, f"{where}.stepsList[{i}]") for i, s in enumerate(d["stepsList"]))
        x = SetplayFeatures(
            our_players_number=d["ourPlayersNumber"],
            their_players_number=d["theirPlayersNumber"],
            abort_condition=BoolTree.from_dict(d["abortCondition"]),
            steps_count=d["steps"],
            steps_list=steps,
            name=str(d.get("name", "")),
        )
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
    if x.steps_count != len(x.steps_list):
        raise FormatError(f"{where}: steps={x.steps_count} but stepsList has {len(x.steps_list)} rows")
    return x


def dataset_to_json(rows: Sequence[SetplayFeatures], extras: Sequence[dict] | None = None) -> str:
    extras = extras or [{}] * len(rows)
    return dumps_json({
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "setplays": [setplay_to_dict(x, e) for x, e in zip(rows, extras)],
    })


def load_dataset(path) -> list[SetplayFeatures]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != DATASET_FORMAT:
        raise FormatError(f"{path}: not a {DATASET_FORMAT} file")
    return [setplay_from_dict(d, f"setplays[{i}]") for i, d in enumerate(doc.get("setplays", []))]


# ---------------------------------------------------------------------------
# CSVs


def _csv(rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def fs_curve_csv(sweep) -> str:
    rows = [("c", "fs_best", "fs_mean", "fs_std")]
    for c, e in sorted(sweep.items()):
        vals = e.fs_values
        rows.append((c, f"{e.fs_best:.9f}", f"{vals.mean():.9f}", f"{vals.std():.9f}"))
    return _csv(rows)


def partition_csv(partition, names: Sequence[str]) -> str:
    mu = np.asarray(partition, dtype=float)
    rows = [("cluster", *names)]
    rows += [(i, *(f"{u:.9f}" for u in mu[i])) for i in range(mu.shape[0])]
    return _csv(rows)


def read_partition_csv(text: str, tol: float = 1e-6) -> tuple[np.ndarray, list[str]]:
    """Parse :func:`partition_csv` output; columns that drift from summing to
    one by less than ``tol`` (rounding) are re-normalized."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:1] != ["cluster"]:
        raise FormatError("partition CSV must start with a 'cluster' header")
    names = rows[0][1:]
    mu = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    sums = mu.sum(axis=0)
    drift = np.abs(sums - 1.0)
    if np.any(drift >= tol):
        bad = [names[j] for j in np.flatnonzero(drift >= tol)]
        raise FormatError(f"columns do not sum to 1: {bad}")
    return mu / sums, names
