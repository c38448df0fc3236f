"""Flat binary containers for dictionaries, measurement matrices and balancings.

Layout (all integers little-endian u32, all reals little-endian float64)::

    magic | rows | cols | rows*cols reals, column-major | ... | len | JSON (UTF-8)

Dictionaries (``HSDICT1\\0``) and measurement matrices (``HSMEAS1\\0``) carry
one matrix. Balanced decompositions (``HSBAL1\\0``) carry three blocks in
the order P (m x m), B (m x n), q (n x 1). The trailing JSON blob holds
provenance. Round trips are bit-exact.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dictlearn import Dictionary
from .errors import ValidationError
from .sensing import BalancedDecomposition, MeasurementMatrix

__all__ = [
    "BAL_MAGIC",
    "DICT_MAGIC",
    "MEAS_MAGIC",
    "read_balance",
    "read_dictionary",
    "read_measurement",
    "write_balance",
    "write_dictionary",
    "write_measurement",
]

DICT_MAGIC = b"HSDICT1\0"
MEAS_MAGIC = b"HSMEAS1\0"
BAL_MAGIC = b"HSBAL1\0"


def _encode(magic: bytes, blocks: list, meta: dict) -> bytes:
    parts = [magic]
    for block in blocks:
        a = np.asarray(block, dtype=np.float64)
        if a.ndim == 1:
            a = a[:, None]
        parts.append(struct.pack("<II", a.shape[0], a.shape[1]))
        parts.append(np.asfortranarray(a).astype("<f8").tobytes(order="F"))
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    return b"".join(parts)


def _decode(raw: bytes, magic: bytes, nblocks: int, path) -> tuple[list, dict]:
    if not raw.startswith(magic):
        raise ValidationError(f"{path}: bad magic (expected {magic!r})")
    pos = len(magic)
    blocks = []
    try:
        for _ in range(nblocks):
            rows, cols = struct.unpack_from("<II", raw, pos)
            pos += 8
            nbytes = rows * cols * 8
            if pos + nbytes > len(raw):
                raise ValidationError(f"{path}: truncated matrix block")
            a = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=pos)
            blocks.append(a.reshape((rows, cols), order="F").astype(np.float64))
            pos += nbytes
        (length,) = struct.unpack_from("<I", raw, pos)
        pos += 4
    except struct.error as exc:
        raise ValidationError(f"{path}: truncated file") from exc
    if pos + length != len(raw):
        raise ValidationError(f"{path}: provenance length {length} does not match file size")
    try:
        meta = json.loads(raw[pos:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: malformed provenance blob") from exc
    return blocks, meta


def write_dictionary(d: Dictionary, path) -> None:
    Path(path).write_bytes(_encode(DICT_MAGIC, [d.matrix], d.provenance))


def read_dictionary(path) -> Dictionary:
    (mat,), meta = _decode(Path(path).read_bytes(), DICT_MAGIC, 1, path)
    return Dictionary(mat, meta)


def write_measurement(phi: MeasurementMatrix, path, extra: dict | None = None) -> None:
    meta = phi.provenance()
    if extra:
        meta.update(extra)
    Path(path).write_bytes(_encode(MEAS_MAGIC, [phi.phi], meta))


def read_measurement(path) -> MeasurementMatrix:
    (mat,), meta = _decode(Path(path).read_bytes(), MEAS_MAGIC, 1, path)
    kind = meta.get("kind")
    if kind not in ("gaussian", "subsample", "svd"):
        raise ValidationError(f"{path}: unknown measurement kind {kind!r}")
    idx = meta.get("indices")
    return MeasurementMatrix(
        phi=mat,
        kind=kind,
        seed=meta.get("seed"),
        source=meta.get("source"),
        indices=None if idx is None else np.asarray(idx, dtype=np.int64),
    )


def write_balance(dec: BalancedDecomposition, path, extra: dict | None = None) -> None:
    meta = {
        "kind": "balanced",
        "iterations_run": dec.iterations_run,
        "imbalance": dec.imbalance,
        "history": list(dec.history),
    }
    if extra:
        meta.update(extra)
    Path(path).write_bytes(_encode(BAL_MAGIC, [dec.p, dec.b, dec.q], meta))


def read_balance(path) -> BalancedDecomposition:
    (p, b, q), meta = _decode(Path(path).read_bytes(), BAL_MAGIC, 3, path)
    if p.shape != (b.shape[0], b.shape[0]) or q.shape != (b.shape[1], 1):
        raise ValidationError(f"{path}: inconsistent block shapes {p.shape}, {b.shape}, {q.shape}")
    return BalancedDecomposition(
        p=p,
        b=b,
        q=q[:, 0].copy(),
        iterations_run=int(meta.get("iterations_run", 0)),
        imbalance=float(meta.get("imbalance", float("nan"))),
        history=list(meta.get("history", [])),
    )
