"""File formats: CSV sample logs, JSON CDF bundles, JSON/CSV reports.

Floats are serialized as decimals with 17 significant digits, which is
lossless for IEEE doubles.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .auction_sim import AuctionModel, FpSampleSet, SpSampleSet
from .dist_core import PiecewiseCdf
from .errors import ValidationError

FORMAT_FP = "fp"
FORMAT_SP = "sp"
FORMAT_FP_PARTIAL = "fp-partial"
FORMAT_SP_PARTIAL = "sp-partial"

_HEADERS = {
    FORMAT_FP: ["y", "z"],
    FORMAT_SP: ["y", "w"],
    FORMAT_FP_PARTIAL: ["r", "z"],
    FORMAT_SP_PARTIAL: ["r", "z", "q"],
}


def fmt_float(v):
    return f"{float(v):.17g}"


def io_write_samples(path, samples, fmt):
    rows = None
    if fmt == FORMAT_FP:
        rows = zip(samples.y, samples.z)
    elif fmt == FORMAT_SP:
        rows = zip(samples.y, samples.w)
    else:
        raise ValidationError(f"unsupported sample format {fmt!r}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HEADERS[fmt])
        for y, idx in rows:
            writer.writerow([fmt_float(y), int(idx)])


def io_read_samples(path, fmt, k):
    """Parse a CSV sample log; malformed rows raise with their line number."""
    if fmt not in (FORMAT_FP, FORMAT_SP):
        raise ValidationError(f"unsupported sample format {fmt!r}")
    ys, idxs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _HEADERS[fmt]:
            raise ValidationError(
                f"{path}: line 1: expected header {','.join(_HEADERS[fmt])!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}: line {lineno}: expected 2 fields")
            try:
                y = float(row[0])
                idx = int(row[1])
            except ValueError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
            if not 0.0 <= y <= 1.0:
                raise ValidationError(f"{path}: line {lineno}: price {y} outside [0,1]")
            if not 1 <= idx <= k:
                raise ValidationError(
                    f"{path}: line {lineno}: bidder index {idx} outside 1..{k}"
                )
            ys.append(y)
            idxs.append(idx)
    if not ys:
        raise ValidationError(f"{path}: no data rows")
    y = np.asarray(ys)
    z = np.asarray(idxs)
    if fmt == FORMAT_FP:
        return FpSampleSet(y=y, z=z, k=k)
    return SpSampleSet(y=y, w=z, k=k)


def io_write_cdfs(path, cdfs, diagnostics=None):
    payload = {
        "version": 1,
        "cdfs": [c.to_dict() for c in cdfs],
        "diagnostics": _jsonable(diagnostics or {}),
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def io_read_cdfs(path):
    payload = json.loads(Path(path).read_text())
    try:
        return [PiecewiseCdf.from_dict(d) for d in payload["cdfs"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: not a CDF bundle: {exc}") from exc


def io_write_model(path, model):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def io_read_model(path):
    try:
        return AuctionModel.from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: not a model file: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(fmt_float(obj))
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def config_hash(config_dict):
    canon = json.dumps(_jsonable(config_dict), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
