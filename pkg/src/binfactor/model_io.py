"""File formats: binary data CSV, fitted model files, metrics and scores.

All writes go through a temp-file-plus-rename so a partial file never
appears at the destination.  Numbers are rendered with shortest
round-trip decimal representation (Python ``repr``), which reproduces
every float bit-exactly on reload.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from typing import Iterable

import numpy as np

from .moments import BinaryMatrix
from .scores import LatentScores
from .simulate import MetricsRecord
from .spectral import FactorModel

MODEL_FORMAT_VERSION = 1

METRICS_COLUMNS = ["scenario", "rep", "max_err", "subspace_d", "med_err", "tau_err", "error"]
TIMING_COLUMNS = ["t_generate", "t_tetrachoric", "t_spectral", "t_scores"]


class DataFormatError(ValueError):
    """A data file does not conform to the expected CSV layout."""


class ModelFormatError(ValueError):
    """A model file is missing, corrupt, or has an unsupported version."""


def read_binary_matrix(path) -> BinaryMatrix:
    """Parse a CSV of 0/1 entries; a non-numeric first row is a header.

    Raises ``DataFormatError`` naming the (1-based) row and column of the
    first offending cell, or the row where the width changes.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [[cell.strip() for cell in row] for row in reader if row]
    if not rows:
        raise DataFormatError(f"{path}: file contains no data")

    names = None
    start = 0
    if not all(_is_number(cell) for cell in rows[0]):
        names = tuple(rows[0])
        start = 1
        if len(rows) == 1:
            raise DataFormatError(f"{path}: header present but no data rows")

    width = len(rows[start])
    data = np.empty((len(rows) - start, width), dtype=np.uint8)
    for i, row in enumerate(rows[start:], start=start):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {width}"
            )
        for j, cell in enumerate(row):
            if cell == "0":
                data[i - start, j] = 0
            elif cell == "1":
                data[i - start, j] = 1
            else:
                raise DataFormatError(
                    f"{path}: cell ({i + 1}, {j + 1}) is {cell!r}, expected 0 or 1"
                )
    try:
        return BinaryMatrix(data, column_names=names)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_model(model: FactorModel, path) -> None:
    """Persist a fitted model as a versioned JSON document."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "binfactor-model",
        "d": int(model.d),
        "p": int(model.p),
        "c_hat": [float(v) for v in model.c_hat],
        "tau2_hat": [float(v) for v in model.tau2_hat],
        "b_hat": [[float(v) for v in row] for row in model.b_hat],
        "eigvals": [float(v) for v in model.eigvals],
        "meta": model.meta,
    }
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


def read_model(path) -> FactorModel:
    """Load a model file written by ``write_model``; round trips bit-exactly."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"{path}: cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "binfactor-model":
        raise ModelFormatError(f"{path}: not a binfactor model file")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format_version {version!r} "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )
    try:
        d, p = int(doc["d"]), int(doc["p"])
        model = FactorModel(
            d=d,
            p=p,
            c_hat=np.asarray(doc["c_hat"], dtype=float),
            b_hat=np.asarray(doc["b_hat"], dtype=float).reshape(p, d),
            tau2_hat=np.asarray(doc["tau2_hat"], dtype=float),
            eigvals=np.asarray(doc["eigvals"], dtype=float),
            meta=dict(doc.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file: {exc}") from exc
    if model.c_hat.shape != (p,) or model.tau2_hat.shape != (p,):
        raise ModelFormatError(f"{path}: field lengths do not match p={p}")
    return model


def write_metrics(
    records: Iterable[MetricsRecord],
    path,
    append: bool = False,
    include_timings: bool = False,
) -> None:
    """Write metric records as CSV.

    Stage timings vary run to run, so they are excluded unless asked for:
    the default output is byte-identical across repeated runs of the same
    seeded experiment.  With ``append`` the existing rows are kept and the
    header is not repeated.
    """
    columns = METRICS_COLUMNS + (TIMING_COLUMNS if include_timings else [])
    lines = []
    existing = ""
    if append and os.path.exists(path):
        with open(path) as fh:
            existing = fh.read()
        if existing and not existing.endswith("\n"):
            existing += "\n"
    if not existing:
        lines.append(",".join(columns))
    for rec in records:
        row = [
            rec.scenario,
            str(rec.rep),
            _fmt(rec.max_err),
            _fmt(rec.subspace_d),
            _fmt(rec.med_err),
            _fmt(rec.tau_err),
            rec.error or "",
        ]
        if include_timings:
            row.extend(_fmt(rec.timings.get(k, float("nan"))) for k in TIMING_COLUMNS)
        lines.append(",".join(row))
    content = existing + "\n".join(lines) + "\n"
    _atomic_write(path, content)


def write_scores(scores: LatentScores, path) -> None:
    """Write latent scores plus convergence columns as CSV."""
    d = scores.z_hat.shape[1]
    header = [f"z_{k + 1}" for k in range(d)] + ["iterations", "grad_norm", "converged"]
    lines = [",".join(header)]
    for i in range(scores.n):
        row = [_fmt(v) for v in scores.z_hat[i]]
        row.append(str(int(scores.iterations[i])))
        row.append(_fmt(scores.grad_norms[i]))
        row.append(str(int(scores.converged[i])))
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write(path, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
