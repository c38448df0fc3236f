"""Measurement matrices, sensing matrices and SVD-based matrix balancing.

Four measurement families are provided: Gaussian, band subsampling, and the
adaptive choice ``phi = U_m'`` built from the leading left singular vectors of
a sparsifying matrix (learned dictionary or DCT basis). For the adaptive
choice with the same sparsifier the sensing matrix collapses to
``diag(sigma_m) V_m'``, which is formed directly.

:func:`balance` factors a wide matrix as ``A = P B diag(q)`` with ``B``
having orthonormal rows and (at convergence) equal column norms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DimensionError, NearSingularError, ValidationError, ZeroColumnError
from .numerics import as_matrix, as_vector, matrix_digest, svd
from .solvers import BpdnProblem, SolveReport, solve_bpdn

__all__ = [
    "BalancedDecomposition",
    "MeasurementMatrix",
    "SensingMatrix",
    "balance",
    "balanced_bpdn",
    "balanced_residual",
    "gaussian_measurement",
    "leverage_imbalance",
    "sampling_ratio",
    "sensing_matrix",
    "subsample_measurement",
    "svd_measurement",
]

DEFAULT_T_MAX = 10
EARLY_STOP = 1e-10
MAX_COND_P = 1e12


@dataclass(frozen=True)
class MeasurementMatrix:
    """An m x d measurement operator with its provenance.

    ``kind`` is one of ``"gaussian"``, ``"subsample"`` or ``"svd"``; ``seed``
    is set for the random kinds and ``source`` names the SVD source matrix
    (a content digest) for the adaptive kind.
    """

    phi: np.ndarray
    kind: str
    seed: int | None = None
    source: str | None = None
    indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    def provenance(self) -> dict:
        out = {"kind": self.kind, "m": self.m, "d": self.d}
        if self.seed is not None:
            out["seed"] = int(self.seed)
        if self.source is not None:
            out["source"] = self.source
        if self.indices is not None:
            out["indices"] = [int(i) for i in self.indices]
        return out


@dataclass(frozen=True)
class SensingMatrix:
    """``a = phi @ sparsifier``; ``sigma_m``/``v_m`` are set on the SVD fast path."""

    a: np.ndarray
    source: dict
    sigma_m: np.ndarray | None = None
    v_m: np.ndarray | None = None

    @property
    def fast_path(self) -> bool:
        return self.sigma_m is not None


def _check_m(m: int, d: int) -> None:
    if not 1 <= m <= d:
        raise ValidationError(f"m must satisfy 1 <= m <= d={d}, got {m}")


def gaussian_measurement(m: int, d: int, seed: int) -> MeasurementMatrix:
    """I.i.d. N(0, 1/m) entries, so that E|phi x|^2 = |x|^2."""
    _check_m(m, d)
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((m, d)) / np.sqrt(m)
    return MeasurementMatrix(phi=phi, kind="gaussian", seed=int(seed))


def subsample_measurement(m: int, d: int, seed: int) -> MeasurementMatrix:
    """m distinct bands drawn uniformly without replacement; row i picks band idx[i]."""
    _check_m(m, d)
    rng = np.random.default_rng(seed)
    idx = rng.choice(d, size=m, replace=False)
    phi = np.zeros((m, d))
    phi[np.arange(m), idx] = 1.0
    return MeasurementMatrix(phi=phi, kind="subsample", seed=int(seed), indices=idx)


def svd_measurement(d_matrix, m: int) -> MeasurementMatrix:
    """``phi = U_m'``: the first m left singular vectors of `d_matrix` as rows."""
    dm = as_matrix(d_matrix, "d_matrix")
    r = min(dm.shape)
    if not 1 <= m <= r:
        raise ValidationError(f"m must satisfy 1 <= m <= {r}, got {m}")
    res = svd(dm)
    phi = np.ascontiguousarray(res.u[:, :m].T)
    return MeasurementMatrix(phi=phi, kind="svd", source=matrix_digest(dm))


def sampling_ratio(m: int, d: int) -> float:
    """Fraction of the d spectral samples actually measured, in percent."""
    if d < 1 or m < 0:
        raise ValidationError(f"invalid sizes m={m}, d={d}")
    return 100.0 * m / d


def sensing_matrix(phi: MeasurementMatrix, sparsifier) -> SensingMatrix:
    """Compose ``a = phi @ sparsifier``.

    When `phi` is the SVD measurement of this very sparsifier the product is
    replaced by ``diag(sigma_m) @ V_m'`` taken from the same decomposition.
    """
    dm = as_matrix(sparsifier, "sparsifier")
    if phi.d != dm.shape[0]:
        raise DimensionError(
            f"measurement has {phi.d} bands but the sparsifier has {dm.shape[0]}"
        )
    digest = matrix_digest(dm)
    source = {"measurement": phi.provenance(), "sparsifier": digest}
    if phi.kind == "svd" and phi.source == digest:
        res = svd(dm)
        m = phi.m
        sigma_m = res.sigma[:m].copy()
        v_m = np.ascontiguousarray(res.v[:, :m])
        a = sigma_m[:, None] * v_m.T
        return SensingMatrix(a=np.ascontiguousarray(a), source=source, sigma_m=sigma_m, v_m=v_m)
    return SensingMatrix(a=phi.phi @ dm, source=source)


# --------------------------------------------------------------------------
# balancing


def balanced_residual(b) -> float:
    """Spread of the column norms: ``max_j |c_j - mean(c)| / mean(c)``."""
    b = as_matrix(b, "b")
    c = np.linalg.norm(b, axis=0)
    cbar = c.mean()
    if cbar == 0.0:
        raise ZeroColumnError("all columns are zero")
    return float(np.max(np.abs(c - cbar)) / cbar)


def leverage_imbalance(b) -> float:
    """:func:`balanced_residual` of ``V'`` from the SVD of `b`.

    For a matrix with orthonormal rows this equals its own column-norm
    spread. For any other matrix it measures how far the row space is from
    one whose orthonormal basis has equal column norms, which is the
    quantity the balancing iteration drives to zero.
    """
    return balanced_residual(svd(b).v.T)


@dataclass
class BalancedDecomposition:
    """``a = p @ b @ diag(q)``.

    ``history[t]`` is :func:`leverage_imbalance` of the iterate after ``t``
    updates (``history[0]`` is that of the input).
    """

    p: np.ndarray
    b: np.ndarray
    q: np.ndarray
    iterations_run: int
    imbalance: float
    history: list = field(default_factory=list)
    _lu: tuple | None = field(default=None, repr=False, compare=False)
    _cond_p: float | None = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def n(self) -> int:
        return self.b.shape[1]

    def reconstruct(self) -> np.ndarray:
        return (self.p @ self.b) * self.q

    def cond_p(self) -> float:
        if self._cond_p is None:
            s = np.linalg.svd(self.p, compute_uv=False)
            self._cond_p = float("inf") if s[-1] == 0.0 else float(s[0] / s[-1])
        return self._cond_p

    def solve_p(self, y: np.ndarray) -> np.ndarray:
        """``p^{-1} y`` via a cached LU factorization."""
        if self.cond_p() > MAX_COND_P:
            raise NearSingularError(f"cond(P) = {self.cond_p():.3g} exceeds {MAX_COND_P:.0e}")
        if self._lu is None:
            self._lu = scipy.linalg.lu_factor(self.p, check_finite=False)
        return scipy.linalg.lu_solve(self._lu, y, check_finite=False)


def balance(
    a,
    t_max: int = DEFAULT_T_MAX,
    tol: float = EARLY_STOP,
    callback: Callable | None = None,
) -> BalancedDecomposition:
    """Matrix balancing by repeated SVD.

    Starting from ``P = I``, ``B = a``, ``q = 1``, each iteration takes
    ``B = U S V'``, rescales the columns of ``V'`` by a diagonal ``S_t`` to a
    common norm, and updates::

        P <- P U S,   B <- V' S_t,   q <- q / diag(S_t)

    so ``a = P B diag(q)`` holds after every update. The common column norm
    is ``sqrt(m/n)``, the value at which rows of ``B`` stay orthonormal once
    the iteration has converged.

    Parameters
    ----------
    a : (m, n) array_like, m <= n, no zero column
    t_max : int
        Number of updates. Iteration stops earlier when the imbalance drops
        below `tol`.
    callback : callable, optional
        Called as ``callback(t, p, b, q)`` after every update.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m > n:
        raise DimensionError(f"balance needs a wide matrix (m <= n), got {a.shape}")
    if t_max < 0:
        raise ValidationError(f"t_max must be >= 0, got {t_max}")
    col = np.linalg.norm(a, axis=0)
    if np.any(col == 0.0):
        raise ZeroColumnError(f"column(s) {np.flatnonzero(col == 0.0).tolist()} are zero")

    target = np.sqrt(m / n)
    p = np.eye(m)
    b = a.copy()
    q = np.ones(n)
    res = svd(b)
    history = [balanced_residual(res.v.T)]
    t = 0
    while t < t_max and history[-1] >= tol:
        vt = res.v.T
        norms = np.linalg.norm(vt, axis=0)
        if np.any(norms == 0.0):
            raise ZeroColumnError("a column left the row space of B (zero leverage)")
        scale = target / norms
        p = p @ (res.u * res.sigma)
        b = vt * scale
        q = q / scale
        t += 1
        if callback is not None:
            callback(t, p, b, q)
        res = svd(b)
        history.append(balanced_residual(res.v.T))
    return BalancedDecomposition(
        p=p, b=b, q=q, iterations_run=t, imbalance=history[-1], history=history
    )


def balanced_bpdn(
    dec: BalancedDecomposition,
    y,
    epsilon: float,
    tol: float = 1e-10,
    max_iter: int = 5_000,
    s0=None,
) -> tuple[np.ndarray, np.ndarray, SolveReport]:
    """BPDN through a balanced factorization.

    Solves ``min |t|_1 s.t. |P^{-1} y - B t|_2 <= epsilon`` and maps back
    with ``s = t / q``. `epsilon` is used as given, not rescaled by P.

    Returns ``(s, t, report)`` where `report` describes the balanced solve.
    """
    y = as_vector(y, "y", dec.m)
    y_t = dec.solve_p(y)
    t0 = None if s0 is None else as_vector(s0, "s0", dec.n) * dec.q
    rep = solve_bpdn(BpdnProblem(dec.b, y_t, epsilon), tol=tol, max_iter=max_iter, s0=t0)
    s = rep.solution / dec.q
    return s, rep.solution, rep
