"""Dictionary learning by alternating Lasso coding and block-coordinate updates.

The objective over p training spectra is::

    F(D, S) = sum_i 1/2 |x_i - D s_i|^2 + lam |s_i|_1,   |d_j|_2 <= 1

Coding solves the Lasso column by column with coordinate descent,
warm-started from the previous codes, so neither half-step can increase F.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import _kernels as K
from .errors import DegenerateInputError, DimensionError, ValidationError
from .numerics import as_matrix

if TYPE_CHECKING:
    from .hsi import SpectraSet

__all__ = [
    "CodingResult",
    "Dictionary",
    "TrainConfig",
    "default_lambda",
    "dictionary_objective",
    "learn_dictionary",
    "sparse_code",
    "update_dictionary",
]

log = logging.getLogger(__name__)

DEAD_ATOM = 1e-10


def default_lambda(d: int) -> float:
    return 1.2 / np.sqrt(d)


@dataclass
class Dictionary:
    """A d x n sparsifying matrix with unit-bounded atoms and its provenance.

    ``provenance`` is a JSON-compatible dict. For learned dictionaries it
    holds ``dataset``, ``lambda``, ``epochs``, ``seed``, ``train_pixel_ids``
    and ``objective_history``.
    """

    matrix: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = as_matrix(self.matrix, "dictionary")
        norms = np.linalg.norm(self.matrix, axis=0)
        if np.any(norms > 1.0 + 1e-12):
            j = int(np.argmax(norms))
            raise ValidationError(f"atom {j} has norm {norms[j]:.17g} > 1")

    @property
    def band_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def atom_count(self) -> int:
        return self.matrix.shape[1]

    @property
    def train_pixel_ids(self) -> set:
        return {(int(x), int(y)) for x, y in self.provenance.get("train_pixel_ids", [])}


@dataclass(frozen=True)
class TrainConfig:
    """Training parameters; ``lam=None`` means 1.2/sqrt(d), ``batch=None`` full-batch."""

    atom_count: int
    lam: float | None = None
    epochs: int = 30
    seed: int = 0
    tol: float = 1e-6
    batch: int | None = None
    code_tol: float = 1e-6
    code_max_sweeps: int = 10_000
    update_max_cycles: int = 200

    def __post_init__(self):
        if self.atom_count < 1:
            raise ValidationError(f"atom_count must be >= 1, got {self.atom_count}")
        if self.lam is not None and not self.lam > 0:
            raise ValidationError(f"lambda must be > 0, got {self.lam}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.batch is not None and self.batch < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch}")


@dataclass
class CodingResult:
    codes: np.ndarray
    converged: np.ndarray
    kkt: np.ndarray
    sweeps: np.ndarray


def dictionary_objective(D, X, S, lam) -> float:
    R = X - D @ S
    return 0.5 * float(np.sum(R * R)) + lam * float(np.abs(S).sum())


def _code(D, X, lam, S0, tol, max_sweeps) -> CodingResult:
    G = np.ascontiguousarray(D.T @ D)
    C = np.ascontiguousarray(D.T @ X)
    yy = np.einsum("ij,ij->j", X, X)
    S = np.zeros((D.shape[1], X.shape[1])) if S0 is None else np.array(S0, dtype=np.float64)
    p = X.shape[1]
    sweeps = np.zeros(p, dtype=np.int64)
    kkts = np.zeros(p)
    status = np.zeros(p, dtype=np.int64)
    K.lasso_cd_batch(G, C, yy, S, float(lam), int(max_sweeps), float(tol), sweeps, kkts, status)
    return CodingResult(S, status == K.CONVERGED, kkts, sweeps)


def sparse_code(
    dictionary,
    x,
    lam: float,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    s0=None,
) -> CodingResult:
    """Lasso codes of every column of `x` under a fixed dictionary.

    `dictionary` may be a :class:`Dictionary` or a plain matrix and `x` a
    SpectraSet or a d x p array. Per-column convergence flags and KKT
    residuals are returned alongside the n x p code matrix.
    """
    D = dictionary.matrix if isinstance(dictionary, Dictionary) else as_matrix(dictionary, "dictionary")
    X = x.columns if hasattr(x, "columns") else np.asarray(x, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != D.shape[0]:
        raise DimensionError(f"spectra have shape {X.shape}, dictionary has {D.shape[0]} bands")
    if not lam > 0:
        raise ValidationError(f"lambda must be > 0, got {lam}")
    return _code(D, X, lam, s0, tol, max_sweeps)


def update_dictionary(D, A, B, tol: float = 1e-6, max_cycles: int = 200) -> tuple[np.ndarray, int]:
    """Block-coordinate minimization of 1/2 tr(D'DA) - tr(D'B) over unit-ball atoms.

    Each atom step ``d_j <- proj(d_j + (b_j - D a_j) / A_jj)`` is the exact
    minimizer in d_j, so the objective never increases. Atoms with
    ``A_jj == 0`` are left untouched. Cycles stop when the relative change
    of D in a cycle is at most `tol`.
    """
    D = D.copy()
    n = D.shape[1]
    for cycle in range(1, max_cycles + 1):
        before = D.copy()
        for j in range(n):
            ajj = A[j, j]
            if ajj <= 0.0:
                continue
            u = D[:, j] + (B[:, j] - D @ A[:, j]) / ajj
            nu = np.linalg.norm(u)
            D[:, j] = u / nu if nu > 1.0 else u
        change = np.linalg.norm(D - before)
        if change <= tol * max(np.linalg.norm(before), 1e-300):
            return D, cycle
    return D, max_cycles


def _reseed_dead(D, X, S, rng_order):
    """Replace atoms whose code rows are (nearly) empty with the worst-fit spectra."""
    A_diag = np.einsum("ij,ij->i", S, S)
    dead = np.flatnonzero(A_diag < DEAD_ATOM)
    if dead.size == 0:
        return D, S, []
    resid = np.linalg.norm(X - D @ S, axis=0)
    # stable sort: ties resolved by column index
    worst = np.argsort(-resid, kind="stable")
    D = D.copy()
    S = S.copy()
    used = []
    for j, i in zip(dead, worst):
        xi = X[:, i]
        nx = np.linalg.norm(xi)
        if nx == 0.0:
            xi = rng_order.standard_normal(X.shape[0])
            nx = np.linalg.norm(xi)
        D[:, j] = xi / nx
        S[j, :] = 0.0
        used.append((int(j), int(i)))
    return D, S, used


def learn_dictionary(
    x: "SpectraSet",
    cfg: TrainConfig,
    callback: Callable | None = None,
) -> Dictionary:
    """Learn an overcomplete dictionary from the columns of `x`.

    Atoms are initialized with `cfg.atom_count` training columns drawn
    without replacement. Each epoch codes all columns (warm-started Lasso
    coordinate descent), re-seeds dead atoms, and runs block-coordinate
    dictionary updates on the statistics ``A = S S'``, ``B = X S'``. With
    ``cfg.batch`` set, the epoch instead walks seeded minibatches and
    accumulates the statistics online.

    ``provenance["objective_history"]`` holds F at initialization (D0,
    S = 0) followed by F after every epoch. `callback`, if given, is called
    as ``callback(epoch, D, S, objective)``.

    Raises
    ------
    DegenerateInputError
        If there are fewer training columns than atoms.
    """
    X = x.columns
    d, p = X.shape
    n = cfg.atom_count
    if p < n:
        raise DegenerateInputError(f"{p} training spectra cannot initialize {n} atoms")
    lam = default_lambda(d) if cfg.lam is None else float(cfg.lam)
    rng = np.random.default_rng(cfg.seed)
    init = rng.choice(p, size=n, replace=False)
    D = X[:, init].copy()
    norms = np.linalg.norm(D, axis=0)
    D[:, norms > 0] /= norms[norms > 0]
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        D[:, zero] = rng.standard_normal((d, zero.size))
        D[:, zero] /= np.linalg.norm(D[:, zero], axis=0)
    S = np.zeros((n, p))
    history = [dictionary_objective(D, X, S, lam)]
    reseeded = 0
    for epoch in range(1, cfg.epochs + 1):
        if cfg.batch is None:
            S = _code(D, X, lam, S, cfg.code_tol, cfg.code_max_sweeps).codes
            D, S, used = _reseed_dead(D, X, S, rng)
            reseeded += len(used)
            for j, i in used:
                log.debug("epoch %d: atom %d re-seeded with training column %d", epoch, j, i)
            D, _ = update_dictionary(D, S @ S.T, X @ S.T, cfg.tol, cfg.update_max_cycles)
        else:
            A = np.zeros((n, n))
            B = np.zeros((d, n))
            order = rng.permutation(p)
            for start in range(0, p, cfg.batch):
                idx = order[start : start + cfg.batch]
                Sb = _code(D, X[:, idx], lam, S[:, idx], cfg.code_tol, cfg.code_max_sweeps).codes
                S[:, idx] = Sb
                A += Sb @ Sb.T
                B += X[:, idx] @ Sb.T
                D, _ = update_dictionary(D, A, B, cfg.tol, cfg.update_max_cycles)
            S = _code(D, X, lam, S, cfg.code_tol, cfg.code_max_sweeps).codes
            D, S, used = _reseed_dead(D, X, S, rng)
            reseeded += len(used)
        obj = dictionary_objective(D, X, S, lam)
        history.append(obj)
        if callback is not None:
            callback(epoch, D, S, obj)
    prov = {
        "dataset": x.dataset_id,
        "lambda": lam,
        "epochs": cfg.epochs,
        "seed": int(cfg.seed),
        "atom_count": n,
        "batch": cfg.batch,
        "tol": cfg.tol,
        "reseeded_atoms": reseeded,
        "train_pixel_ids": [[int(a), int(b)] for a, b in x.pixel_ids],
        "objective_history": history,
    }
    return Dictionary(D, prov)
