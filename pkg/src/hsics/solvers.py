"""l1 solvers: coordinate-descent Lasso, l1-ball projection, and BPDN.

BPDN is solved the SPGL1 way: the Pareto curve ``phi(tau) = |y - A s_tau|_2``
of the l1-constrained least-squares problem is traced by Newton iterations on
``tau`` until ``phi(tau) = epsilon``; every curve evaluation is a
spectral-projected-gradient solve warm-started from the previous one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InfeasibleError, ValidationError
from .numerics import as_matrix, as_vector

__all__ = [
    "BpdnProblem",
    "LassoProblem",
    "SolveReport",
    "kkt_residual",
    "lasso_cd",
    "lasso_objective",
    "project_l1",
    "solve_bpdn",
    "solve_bpdn_batch",
    "solve_lasso_constrained",
]

# relative band around epsilon accepted as the BPDN root
ROOT_RTOL = 1e-3
MAX_ROOT_ITERATIONS = 30


@dataclass(frozen=True)
class LassoProblem:
    """min 1/2 |y - a s|_2^2 + lam |s|_1"""

    a: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        y = as_vector(self.y, "y", a.shape[0])
        if not self.lam > 0:
            raise ValidationError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class BpdnProblem:
    """min |s|_1 s.t. |y - a s|_2 <= epsilon"""

    a: np.ndarray
    y: np.ndarray
    epsilon: float

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        y = as_vector(self.y, "y", a.shape[0])
        if not self.epsilon >= 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    objective: float
    kkt_residual: float = float("nan")
    tau: float = float("nan")
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def lasso_objective(a, y, s, lam) -> float:
    r = y - a @ s
    return 0.5 * float(r @ r) + lam * float(np.abs(s).sum())


def kkt_residual(a, y, s, lam) -> float:
    """Largest violation of the Lasso optimality conditions, computed from scratch."""
    g = a.T @ (y - a @ s)
    viol = np.where(
        s > 0, np.abs(g - lam), np.where(s < 0, np.abs(g + lam), np.abs(g) - lam)
    )
    return float(max(viol.max(), 0.0))


def lasso_cd(
    problem: LassoProblem,
    s0=None,
    max_iter: int = 10_000,
    tol: float = 1e-6,
    record_trace: bool = False,
) -> SolveReport:
    """Solve the Lasso by cyclic coordinate descent.

    Coordinates are visited in index order every sweep. `converged` is true
    when the KKT residual drops to `tol` within `max_iter` sweeps; otherwise
    the last iterate is returned with ``converged=False``.

    With ``record_trace=True`` the report carries the objective before the
    first sweep and after every sweep.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    a, y, lam = problem.a, problem.y, float(problem.lam)
    n = a.shape[1]
    s = np.zeros(n) if s0 is None else as_vector(s0, "s0", n).copy()
    G = np.ascontiguousarray(a.T @ a)
    c = a.T @ y
    trace = np.empty(max_iter + 1) if record_trace else np.empty(0)
    sweeps, _, status = K.lasso_cd_gram(G, c, float(y @ y), s, lam, max_iter, tol, trace)
    if record_trace:
        trace = trace[: sweeps + 1].copy()
    r = y - a @ s
    kkt = kkt_residual(a, y, s, lam)
    return SolveReport(
        solution=s,
        residual_norm=float(np.linalg.norm(r)),
        iterations=int(sweeps),
        converged=bool(status == K.CONVERGED and kkt <= tol),
        objective=0.5 * float(r @ r) + lam * float(np.abs(s).sum()),
        kkt_residual=kkt,
        objective_trace=trace,
    )


def project_l1(v, tau: float) -> np.ndarray:
    """Euclidean projection of `v` onto the l1 ball of radius `tau`."""
    if not tau >= 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    v = as_vector(v, "v")
    return K.project_l1(v, float(tau))


def _operator(a):
    # the kernels take A' (contiguous rows = columns of A) and the Gram matrix
    a = as_matrix(a, "a")
    at = np.ascontiguousarray(a.T)
    return at, np.ascontiguousarray(at @ a)


def solve_lasso_constrained(
    a,
    y,
    tau: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    s0=None,
    face_steps: bool = True,
) -> SolveReport:
    """min |y - a s|_2 subject to |s|_1 <= tau.

    Spectral projected gradient: Barzilai-Borwein step lengths and a
    nonmonotone backtracking search along the projection arc. The loop exits
    when the projected-gradient norm is at most `tol`. With `face_steps`
    the iteration also tries an exact least-squares solve on the current
    support/sign face whenever the face stops changing, which makes the
    final phase finite on small dense problems.
    """
    if not tau >= 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    At, G = _operator(a)
    m, n = At.shape[1], At.shape[0]
    y = as_vector(y, "y", m)
    x = np.zeros(n) if s0 is None else as_vector(s0, "s0", n).copy()
    its, status, _ = K.spg_lasso(
        At, G, y, float(tau), x, int(max_iter), float(tol), -1.0, 0.0, 3, face_steps, -1.0
    )
    r = y - At.T @ x
    rn = float(np.linalg.norm(r))
    return SolveReport(
        solution=x,
        residual_norm=rn,
        iterations=int(its),
        converged=bool(status == K.CONVERGED),
        objective=rn,
        tau=float(tau),
    )


def solve_bpdn(
    problem: BpdnProblem,
    tol: float = 1e-10,
    max_iter: int = 5_000,
    s0=None,
    face_steps: bool = True,
) -> SolveReport:
    """Basis pursuit denoising, min |s|_1 s.t. |y - a s|_2 <= epsilon.

    Parameters
    ----------
    problem : BpdnProblem
    tol : float
        Projected-gradient tolerance of each inner constrained solve.
    max_iter : int
        Iteration cap of each inner solve; at most 30 root iterations are run.
    s0 : array_like, optional
        Warm start; its l1 norm seeds the root finder.

    Returns
    -------
    SolveReport
        ``converged`` is true when the residual lies within a relative band
        of 1e-3 around epsilon (or the zero vector is feasible). An epsilon
        below ``1e-10 * |y|`` is raised to that floor, and the l1 norm is then
        certified to within 1e-5 of the basis-pursuit optimum.

    Raises
    ------
    InfeasibleError
        If the least-squares residual itself exceeds epsilon.
    """
    At, G = _operator(problem.a)
    y = problem.y
    eps = float(problem.epsilon)
    n = At.shape[0]
    if s0 is None:
        x = np.zeros(n)
        tau = 0.0
    else:
        x = as_vector(s0, "s0", n).copy()
        tau = float(np.abs(x).sum())
    tau, its, roots, status = K.spg_bpdn(
        At, G, y, eps, x, tau, int(max_iter), float(tol), ROOT_RTOL,
        MAX_ROOT_ITERATIONS, 3, face_steps, 1e-10,
    )
    r = y - problem.a @ x
    rn = float(np.linalg.norm(r))
    if status == K.INFEASIBLE:
        raise InfeasibleError(
            f"residual floor {rn:.6g} exceeds epsilon {eps:.6g}: y is not within epsilon of range(A)"
        )
    return SolveReport(
        solution=x,
        residual_norm=rn,
        iterations=int(its),
        converged=bool(status == K.CONVERGED),
        objective=float(np.abs(x).sum()),
        tau=float(tau),
    )


@dataclass
class BatchReport:
    solutions: np.ndarray
    residual_norms: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    infeasible: np.ndarray


def solve_bpdn_batch(a, Y, epsilon: float, tol: float = 1e-10, max_iter: int = 5_000, S0=None) -> BatchReport:
    """:func:`solve_bpdn` for every column of `Y` without per-column Python overhead.

    Infeasible columns are flagged instead of raising.
    """
    if not epsilon >= 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    At, G = _operator(a)
    m, n = At.shape[1], At.shape[0]
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != m:
        raise ValidationError(f"measurements have shape {Y.shape}, expected ({m}, p)")
    if not np.all(np.isfinite(Y)):
        raise ValidationError("measurements contain NaN or Inf")
    p = Y.shape[1]
    S = np.zeros((n, p)) if S0 is None else np.array(S0, dtype=np.float64)
    taus = np.zeros(p)
    its = np.zeros(p, dtype=np.int64)
    status = np.zeros(p, dtype=np.int64)
    K.bpdn_batch(At, G, np.ascontiguousarray(Y), float(epsilon), S, int(max_iter), float(tol),
                 ROOT_RTOL, MAX_ROOT_ITERATIONS, 3, True, 1e-10, taus, its, status)
    R = Y - At.T @ S
    return BatchReport(
        solutions=S,
        residual_norms=np.linalg.norm(R, axis=0),
        iterations=its,
        converged=status == K.CONVERGED,
        infeasible=status == K.INFEASIBLE,
    )
