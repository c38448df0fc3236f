"""Hyperspectral data: ENVI BSQ I/O, pixel spectra, splits and synthetic scenes."""
from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dictlearn import Dictionary
from .errors import (
    DegenerateInputError,
    DimensionError,
    MissingKeyError,
    SizeMismatchError,
    UnsupportedDataTypeError,
    UnsupportedInterleaveError,
    ValidationError,
)

__all__ = [
    "HsiCube",
    "SpectraSet",
    "SynthScene",
    "read_envi",
    "read_spectra_csv",
    "split_train_test",
    "synth_scene",
    "to_spectra",
    "write_envi",
    "write_spectra_csv",
]

log = logging.getLogger(__name__)

# ENVI data type code -> numpy kind (byte order is applied separately)
_DTYPES = {4: "f4", 5: "f8"}
_REQUIRED = ("samples", "lines", "bands", "data type", "interleave")
_DATA_SUFFIXES = ("", ".img", ".dat", ".raw", ".bsq", ".bin")


def fmt(v: float) -> str:
    """17-significant-digit decimal, enough to round-trip a float64."""
    return format(float(v), ".17g")


@dataclass
class HsiCube:
    """Band-sequential reflectance cube; ``data`` has shape (bands, lines, samples)."""

    data: np.ndarray
    wavelengths_nm: np.ndarray | None = None
    data_type: int = 5
    byte_order: int = 0
    name: str = "cube"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DimensionError(f"cube data must be (bands, lines, samples), got {data.shape}")
        self.data = data
        if self.wavelengths_nm is not None:
            w = np.asarray(self.wavelengths_nm, dtype=np.float64)
            if w.shape != (data.shape[0],):
                raise DimensionError(f"{w.shape[0]} wavelengths for {data.shape[0]} bands")
            if np.any(np.diff(w) <= 0):
                raise ValidationError("wavelengths must be strictly increasing")
            self.wavelengths_nm = w
        if self.data_type not in _DTYPES:
            raise UnsupportedDataTypeError(f"data type {self.data_type} not supported (4 or 5)")

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def lines(self) -> int:
        return self.data.shape[1]

    @property
    def samples(self) -> int:
        return self.data.shape[2]


def _parse_header(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ENVI":
        raise ValidationError("not an ENVI header (first line must be 'ENVI')")
    body = "\n".join(lines[1:])
    out = {}
    # key = value, where value may be a {...} block spanning lines
    for m in re.finditer(r"^\s*([^=\n]+?)\s*=\s*(\{[^}]*\}|[^\n]*)", body, re.M):
        key = m.group(1).strip().lower()
        val = m.group(2).strip()
        if val.startswith("{"):
            val = val[1:-1].strip()
        out[key] = val
    return out


def _int_key(hdr: dict, key: str) -> int:
    try:
        return int(hdr[key])
    except ValueError as exc:
        raise ValidationError(f"header key '{key}' is not an integer: {hdr[key]!r}") from exc


def _data_path(header_path: Path, hdr: dict) -> Path:
    if "data file" in hdr:
        p = Path(hdr["data file"])
        return p if p.is_absolute() else header_path.parent / p
    stem = header_path.with_suffix("") if header_path.suffix.lower() == ".hdr" else header_path
    for suffix in _DATA_SUFFIXES:
        cand = Path(str(stem) + suffix)
        if cand.is_file() and cand != header_path:
            return cand
    raise ValidationError(f"no binary file found next to {header_path}")


def read_envi(header_path) -> HsiCube:
    """Read an ENVI BSQ raster of 32- or 64-bit floats.

    The binary is looked up as the header path without ``.hdr`` (optionally
    with one of .img/.dat/.raw/.bsq/.bin) unless the header names a
    ``data file``. Values are converted to float64.

    Raises
    ------
    MissingKeyError, UnsupportedInterleaveError, UnsupportedDataTypeError,
    SizeMismatchError
    """
    header_path = Path(header_path)
    hdr = _parse_header(header_path.read_text(encoding="utf-8", errors="replace"))
    for key in _REQUIRED:
        if key not in hdr:
            raise MissingKeyError(f"header is missing '{key}'")
    samples, lines, bands = (_int_key(hdr, k) for k in ("samples", "lines", "bands"))
    if min(samples, lines, bands) < 1:
        raise ValidationError(f"bad geometry samples={samples} lines={lines} bands={bands}")
    interleave = hdr["interleave"].strip().lower()
    if interleave != "bsq":
        raise UnsupportedInterleaveError(f"interleave '{interleave}' not supported (bsq only)")
    dtype_code = _int_key(hdr, "data type")
    if dtype_code not in _DTYPES:
        raise UnsupportedDataTypeError(f"data type {dtype_code} not supported (4 or 5)")
    byte_order = _int_key(hdr, "byte order") if "byte order" in hdr else 0
    if byte_order not in (0, 1):
        raise ValidationError(f"byte order must be 0 or 1, got {byte_order}")
    offset = _int_key(hdr, "header offset") if "header offset" in hdr else 0

    dt = np.dtype(("<" if byte_order == 0 else ">") + _DTYPES[dtype_code])
    path = _data_path(header_path, hdr)
    expected = samples * lines * bands * dt.itemsize
    size = os.path.getsize(path) - offset
    if size != expected:
        raise SizeMismatchError(
            f"{path.name}: {size} data bytes, header implies {expected} "
            f"({samples}x{lines}x{bands}x{dt.itemsize})"
        )
    with open(path, "rb") as fh:
        fh.seek(offset)
        raw = fh.read(expected)
    data = np.frombuffer(raw, dtype=dt).astype(np.float64).reshape(bands, lines, samples)

    wl = None
    if "wavelength" in hdr:
        parts = [p for p in re.split(r"[,\s]+", hdr["wavelength"]) if p]
        wl = np.array([float(p) for p in parts])
        if wl.shape[0] != bands:
            raise DimensionError(f"{wl.shape[0]} wavelengths for {bands} bands")
        if "wavelength units" in hdr and hdr["wavelength units"].lower().startswith("micro"):
            wl = wl * 1000.0
    return HsiCube(
        data=data,
        wavelengths_nm=wl,
        data_type=dtype_code,
        byte_order=byte_order,
        name=header_path.stem,
    )


def write_envi(cube: HsiCube, header_path) -> Path:
    """Write `cube` as ENVI BSQ in its own data type and byte order.

    The binary goes to the header path with ``.hdr`` replaced by ``.img``.
    Returns the binary path.
    """
    header_path = Path(header_path)
    data_path = header_path.with_suffix(".img")
    lines = [
        "ENVI",
        f"samples = {cube.samples}",
        f"lines = {cube.lines}",
        f"bands = {cube.bands}",
        "header offset = 0",
        "file type = ENVI Standard",
        f"data type = {cube.data_type}",
        "interleave = bsq",
        f"byte order = {cube.byte_order}",
    ]
    if cube.wavelengths_nm is not None:
        lines.append("wavelength units = Nanometers")
        lines.append("wavelength = {" + ", ".join(fmt(w) for w in cube.wavelengths_nm) + "}")
    header_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    dt = np.dtype(("<" if cube.byte_order == 0 else ">") + _DTYPES[cube.data_type])
    data_path.write_bytes(np.ascontiguousarray(cube.data, dtype=dt).tobytes())
    return data_path


@dataclass
class SpectraSet:
    """p spectra of length d stored as the columns of ``columns`` (d x p).

    ``pixel_ids`` is a (p, 2) integer array of original (x, y) coordinates.
    """

    columns: np.ndarray
    pixel_ids: np.ndarray
    normalized: bool = False
    wavelengths_nm: np.ndarray | None = None
    dataset_id: str = ""
    dropped_ids: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        # C order throughout, so BLAS products do not depend on how a set was built
        cols = np.ascontiguousarray(self.columns, dtype=np.float64)
        if cols.ndim != 2:
            raise DimensionError(f"columns must be 2-D (d x p), got {cols.shape}")
        ids = np.asarray(self.pixel_ids, dtype=np.int64).reshape(-1, 2)
        if ids.shape[0] != cols.shape[1]:
            raise DimensionError(f"{ids.shape[0]} pixel ids for {cols.shape[1]} columns")
        self.columns = cols
        self.pixel_ids = ids
        if not self.dataset_id:
            self.dataset_id = "sha256:" + self.content_hash()

    @property
    def d(self) -> int:
        return self.columns.shape[0]

    @property
    def p(self) -> int:
        return self.columns.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.columns.shape, dtype="<u8").tobytes())
        h.update(np.ascontiguousarray(self.columns, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.pixel_ids, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def id_set(self) -> set:
        return {(int(x), int(y)) for x, y in self.pixel_ids}

    def subset(self, idx) -> "SpectraSet":
        idx = np.asarray(idx, dtype=np.int64)
        return SpectraSet(
            columns=self.columns[:, idx],
            pixel_ids=self.pixel_ids[idx],
            normalized=self.normalized,
            wavelengths_nm=self.wavelengths_nm,
            dataset_id=self.dataset_id,
        )

    def select_bands(self, keep) -> "SpectraSet":
        """Restrict to the bands in `keep` (renormalizing if the set was normalized)."""
        keep = np.asarray(keep, dtype=np.int64)
        cols = self.columns[keep]
        wl = None if self.wavelengths_nm is None else self.wavelengths_nm[keep]
        out = SpectraSet(cols, self.pixel_ids, False, wl, self.dataset_id + f":bands{len(keep)}")
        return _normalize(out) if self.normalized else out


def _normalize(s: SpectraSet) -> SpectraSet:
    norms = np.linalg.norm(s.columns, axis=0)
    keep = norms > 0
    dropped = s.pixel_ids[~keep]
    for x, y in dropped:
        log.info("dropping zero pixel (x=%d, y=%d)", x, y)
    return SpectraSet(
        columns=s.columns[:, keep] / norms[keep],
        pixel_ids=s.pixel_ids[keep],
        normalized=True,
        wavelengths_nm=s.wavelengths_nm,
        dataset_id=s.dataset_id,
        dropped_ids=np.concatenate([s.dropped_ids, dropped]),
    )


def to_spectra(cube: HsiCube, normalize: bool = True, dataset_id: str = "") -> SpectraSet:
    """Flatten a cube to pixel columns in line-major order (x varies fastest).

    With `normalize`, every column is scaled to unit l2 norm and zero pixels
    are dropped (their ids are kept in ``dropped_ids`` and logged).
    """
    bands, lines, samples = cube.data.shape
    cols = cube.data.reshape(bands, lines * samples)
    yy, xx = np.divmod(np.arange(lines * samples), samples)
    ids = np.stack([xx, yy], axis=1)
    raw = SpectraSet(cols.copy(), ids, False, cube.wavelengths_nm, dataset_id or cube.name)
    return _normalize(raw) if normalize else raw


def split_train_test(s: SpectraSet, train_fraction: float, seed: int) -> tuple[SpectraSet, SpectraSet]:
    """Uniform random disjoint split; ``|train| = round(train_fraction * p)`` (halves round up)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = math.floor(train_fraction * s.p + 0.5)
    if n_train == 0 or n_train == s.p:
        raise DegenerateInputError(
            f"split of {s.p} pixels at fraction {train_fraction} leaves one side empty"
        )
    perm = np.random.default_rng(seed).permutation(s.p)
    return s.subset(np.sort(perm[:n_train])), s.subset(np.sort(perm[n_train:]))


def write_spectra_csv(s: SpectraSet, path) -> None:
    """One row per band, one column per pixel (header ``band,x:y,...``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["band"] + [f"{x}:{y}" for x, y in s.pixel_ids])
        for b in range(s.d):
            w.writerow([b] + [fmt(v) for v in s.columns[b]])


def read_spectra_csv(path, dataset_id: str = "") -> SpectraSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or not rows[0] or rows[0][0] != "band":
        raise ValidationError(f"{path}: expected a 'band,x:y,...' header and at least one band")
    try:
        ids = [tuple(int(v) for v in h.split(":")) for h in rows[0][1:]]
        cols = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed value ({exc})") from exc
    if cols.ndim != 2 or cols.shape[1] != len(ids) or any(len(i) != 2 for i in ids):
        raise DimensionError(f"{path}: ragged table")
    if not np.all(np.isfinite(cols)):
        raise ValidationError(f"{path}: NaN or Inf in spectra")
    normalized = bool(cols.size) and bool(
        np.all(np.abs(np.linalg.norm(cols, axis=0) - 1.0) <= 1e-12)
    )
    return SpectraSet(cols, np.array(ids, dtype=np.int64), normalized, None, dataset_id)


@dataclass
class SynthScene:
    """Planted-model scene: spectra = normalize(D s + noise) with k-sparse s."""

    true_dictionary: Dictionary
    true_codes: np.ndarray
    spectra: SpectraSet
    noise_sigma: float
    seed: int


def synth_scene(
    d: int,
    n_atoms: int,
    k: int,
    p: int,
    noise_sigma: float,
    seed: int,
    dictionary_seed: int | None = None,
) -> SynthScene:
    """Synthetic scene from a column-normalized Gaussian dictionary.

    Every code has k nonzeros at uniformly drawn positions with N(0,1)
    values, rescaled so the clean spectrum ``D s`` has unit norm; i.i.d.
    N(0, noise_sigma^2) noise is added per band and each spectrum is then
    normalized. `dictionary_seed` (default `seed`) draws the dictionary
    separately, so several scenes can share one planted dictionary.
    """
    if d < 1 or n_atoms < 1 or p < 1:
        raise ValidationError(f"d, n_atoms and p must be >= 1 (got {d}, {n_atoms}, {p})")
    if not 1 <= k <= n_atoms:
        raise ValidationError(f"k must satisfy 1 <= k <= n_atoms={n_atoms}, got {k}")
    if not noise_sigma >= 0:
        raise ValidationError(f"noise_sigma must be >= 0, got {noise_sigma}")
    dseed = seed if dictionary_seed is None else dictionary_seed
    drng = np.random.default_rng([dseed, 0])
    D = drng.standard_normal((d, n_atoms))
    D /= np.linalg.norm(D, axis=0)

    rng = np.random.default_rng([seed, 1])
    codes = np.zeros((n_atoms, p))
    for i in range(p):
        support = rng.choice(n_atoms, size=k, replace=False)
        codes[support, i] = rng.standard_normal(k)
    clean = D @ codes
    norms = np.linalg.norm(clean, axis=0)
    if np.any(norms == 0):
        raise DegenerateInputError("a planted spectrum is exactly zero")
    codes /= norms
    clean /= norms
    noisy = clean + noise_sigma * rng.standard_normal((d, p))
    nn = np.linalg.norm(noisy, axis=0)
    if np.any(nn == 0):
        raise DegenerateInputError("a noisy spectrum is exactly zero")
    tag = f"synth:d{d}:n{n_atoms}:k{k}:p{p}:sigma{fmt(noise_sigma)}:seed{seed}:dseed{dseed}"
    ids = np.stack([np.arange(p), np.zeros(p, dtype=np.int64)], axis=1)
    spectra = SpectraSet(noisy / nn, ids, True, None, tag)
    truth = Dictionary(D, {"kind": "planted", "seed": int(dseed), "dataset": tag})
    return SynthScene(truth, codes, spectra, float(noise_sigma), int(seed))
