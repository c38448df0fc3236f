"""Pipeline comparison, conditioning study and cross-scene robustness runs.

A pipeline pairs a sparsifier (learned dictionary or DCT basis) with a
sampler (Gaussian, band subsampling, or the SVD of the sparsifier) and
optionally balances the sensing matrix before solving BPDN. Every method in
one comparison sees the same test pixels and the same epsilon.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dictlearn import Dictionary, TrainConfig, learn_dictionary
from .errors import (
    DimensionError,
    NumericalError,
    TrainTestOverlapError,
    ValidationError,
    ZeroColumnError,
)
from .hsi import SpectraSet, fmt
from .numerics import condition_number, dct_basis
from .sensing import (
    DEFAULT_T_MAX,
    MeasurementMatrix,
    balance,
    gaussian_measurement,
    sensing_matrix,
    subsample_measurement,
    svd_measurement,
)
from .solvers import solve_bpdn_batch

__all__ = [
    "ErrorCurve",
    "PIPELINES",
    "PipelineSpec",
    "RobustnessReport",
    "check_hygiene",
    "condition_curve",
    "measurement_for",
    "pipeline",
    "relative_error",
    "robustness_experiment",
    "run_pipeline",
    "sparsifier_matrix",
    "write_condition_csv",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01


@dataclass(frozen=True)
class PipelineSpec:
    name: str
    sparsifier: str  # "dct" | "learned"
    sampler: str  # "gaussian" | "subsample" | "svd"
    m_list: tuple = (4, 8, 16, 32)
    balanced: bool = False
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.sparsifier not in ("dct", "learned"):
            raise ValidationError(f"unknown sparsifier '{self.sparsifier}'")
        if self.sampler not in ("gaussian", "subsample", "svd"):
            raise ValidationError(f"unknown sampler '{self.sampler}'")
        m = tuple(int(v) for v in self.m_list)
        if not m or m[0] < 1 or any(b <= a for a, b in zip(m, m[1:])):
            raise ValidationError(f"m_list must be positive and strictly increasing, got {m}")
        if not self.epsilon >= 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "m_list", m)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "sparsifier": self.sparsifier,
            "sampler": self.sampler,
            "m_list": list(self.m_list),
            "balanced": self.balanced,
            "epsilon": self.epsilon,
        }


PIPELINES = {
    "dctgaussian": ("dct", "gaussian", False),
    "dsub": ("learned", "subsample", False),
    "dgaussian": ("learned", "gaussian", False),
    "dsvd": ("learned", "svd", False),
    "dctsvd": ("dct", "svd", False),
    "dsvd-balanced": ("learned", "svd", True),
}


def pipeline(name: str, m_list=(4, 8, 16, 32), epsilon: float = DEFAULT_EPSILON) -> PipelineSpec:
    """One of the named pipelines in :data:`PIPELINES`."""
    key = name.lower()
    if key not in PIPELINES:
        raise ValidationError(f"unknown method '{name}' (choose from {', '.join(PIPELINES)})")
    sp, sa, bal = PIPELINES[key]
    return PipelineSpec(key, sp, sa, tuple(m_list), bal, epsilon)


def relative_error(x_star, x) -> float:
    """``|x* - x|_2 / |x|_2``."""
    x_star = np.asarray(x_star, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x_star.shape != x.shape:
        raise DimensionError(f"shapes differ: {x_star.shape} vs {x.shape}")
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ValidationError("reference signal has zero norm")
    return float(np.linalg.norm(x_star - x) / nx)


@dataclass
class ErrorCurve:
    """Per-m reconstruction error statistics over a test set.

    ``per_pixel[i, j]`` is the relative error of test pixel j at
    ``m_values[i]`` (NaN where the solve failed outright); ``failed`` flags
    pixels whose solve did not converge or was infeasible. Means and
    standard deviations (ddof=0) run over the finite entries.
    """

    m_values: list
    mean_rel_error: list
    std_rel_error: list
    n_pixels: list
    n_failed: list
    pipeline: str = ""
    dataset: str = ""
    per_pixel: np.ndarray | None = field(default=None, repr=False)
    failed: np.ndarray | None = field(default=None, repr=False)
    reconstructions: list | None = field(default=None, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "mean_rel_err", "std_rel_err", "n_pixels", "n_failed"])
            for row in zip(self.m_values, self.mean_rel_error, self.std_rel_error, self.n_pixels, self.n_failed):
                w.writerow([row[0], fmt(row[1]), fmt(row[2]), row[3], row[4]])

    @classmethod
    def from_csv(cls, path) -> "ErrorCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            [int(r["m"]) for r in rows],
            [float(r["mean_rel_err"]) for r in rows],
            [float(r["std_rel_err"]) for r in rows],
            [int(r["n_pixels"]) for r in rows],
            [int(r["n_failed"]) for r in rows],
        )


def sparsifier_matrix(spec: PipelineSpec, d: int, dictionary: Dictionary | None) -> np.ndarray:
    if spec.sparsifier == "dct":
        return dct_basis(d)
    if dictionary is None:
        raise ValidationError(f"pipeline '{spec.name}' needs a learned dictionary")
    if dictionary.band_count != d:
        raise DimensionError(f"dictionary has {dictionary.band_count} bands, data has {d}")
    return dictionary.matrix


def measurement_for(spec: PipelineSpec, m: int, sparsifier: np.ndarray, seed: int) -> MeasurementMatrix:
    """The measurement matrix a pipeline uses at m (the seed is used as given)."""
    d = sparsifier.shape[0]
    if spec.sampler == "gaussian":
        return gaussian_measurement(m, d, seed)
    if spec.sampler == "subsample":
        return subsample_measurement(m, d, seed)
    return svd_measurement(sparsifier, m)


def check_hygiene(dictionary: Dictionary | None, train: SpectraSet | None, test: SpectraSet) -> None:
    """Reject test pixels that were used for training.

    Pixel ids are only comparable within one dataset, so the check applies
    when the dictionary's (or training set's) dataset id equals the test
    set's.
    """
    test_ids = test.id_set()
    if dictionary is not None and dictionary.provenance.get("dataset") == test.dataset_id:
        overlap = dictionary.train_pixel_ids & test_ids
        if overlap:
            raise TrainTestOverlapError(
                f"{len(overlap)} test pixel(s) were used to train the dictionary, e.g. {min(overlap)}"
            )
    if train is not None and train.dataset_id == test.dataset_id:
        overlap = train.id_set() & test_ids
        if overlap:
            raise TrainTestOverlapError(f"{len(overlap)} pixel(s) are in both train and test")


def run_pipeline(
    spec: PipelineSpec,
    train: SpectraSet | None,
    test: SpectraSet,
    seed: int,
    dictionary: Dictionary | None = None,
    keep_reconstructions: bool = False,
    warm_start: bool = False,
    tol: float = 1e-10,
    max_iter: int = 5_000,
) -> ErrorCurve:
    """Compress and reconstruct every test spectrum at each m of `spec`.

    For each m: build the measurement matrix (Gaussian and subsampling use
    `seed` directly), form the sensing matrix (``diag(sigma_m) V_m'`` for the
    SVD sampler), balance it if requested, take ``y = phi x``, solve BPDN
    with ``spec.epsilon``, and record the relative error of the sparsifier
    times the code.

    With `warm_start` each solve starts from the solution at the previous m.
    That is off by default: the previous solution's l1 norm usually lies
    above the new root, and approaching it from above is slower than the
    cold start's Newton steps from below.
    """
    d = test.d
    if train is not None and train.d != d:
        raise DimensionError(f"train has {train.d} bands, test has {d}")
    if spec.m_list[-1] > d:
        raise ValidationError(f"m={spec.m_list[-1]} exceeds the band count {d}")
    if spec.sparsifier == "learned":
        check_hygiene(dictionary, train, test)
    else:
        check_hygiene(None, train, test)
    D = sparsifier_matrix(spec, d, dictionary)
    X = test.columns
    p = X.shape[1]
    n = D.shape[1]
    xnorm = np.linalg.norm(X, axis=0)
    if np.any(xnorm == 0):
        raise ValidationError("test set contains zero spectra")

    per_pixel = np.full((len(spec.m_list), p), np.nan)
    failed = np.zeros((len(spec.m_list), p), dtype=bool)
    recons = [] if keep_reconstructions else None
    S = np.zeros((n, p))
    means, stds, counts, fails = [], [], [], []
    for row, m in enumerate(spec.m_list):
        phi = measurement_for(spec, m, D, seed)
        sm = sensing_matrix(phi, D)
        Y = phi.phi @ X
        if spec.balanced:
            try:
                dec = balance(sm.a, DEFAULT_T_MAX)
                Yt = dec.solve_p(Y)
            except NumericalError as exc:
                # no usable factorization at this m: every pixel is flagged
                log.warning("%s, m=%d: %s", spec.name, m, exc)
                failed[row] = True
                if recons is not None:
                    recons.append(np.full_like(X, np.nan))
                means.append(float("nan"))
                stds.append(float("nan"))
                counts.append(int(p))
                fails.append(int(p))
                S = np.zeros((n, p))
                continue
            rep = solve_bpdn_batch(dec.b, Yt, spec.epsilon, tol, max_iter, S * dec.q[:, None])
            S = rep.solutions / dec.q[:, None]
        else:
            rep = solve_bpdn_batch(sm.a, Y, spec.epsilon, tol, max_iter, S)
            S = rep.solutions
        Xs = D @ S
        err = np.linalg.norm(Xs - X, axis=0) / xnorm
        err[rep.infeasible] = np.nan
        per_pixel[row] = err
        failed[row] = ~rep.converged
        if recons is not None:
            recons.append(Xs)
        finite = err[np.isfinite(err)]
        means.append(float(finite.mean()) if finite.size else float("nan"))
        stds.append(float(finite.std()) if finite.size else float("nan"))
        counts.append(int(p))
        fails.append(int(failed[row].sum()))
        if warm_start:
            # infeasible pixels restart cold at the next m
            S[:, rep.infeasible] = 0.0
        else:
            S = np.zeros((n, p))
    return ErrorCurve(
        list(spec.m_list), means, stds, counts, fails, spec.name, test.dataset_id,
        per_pixel, failed, recons,
    )


def condition_curve(dictionary, m_list, balanced: bool = False, t_max: int = DEFAULT_T_MAX) -> list:
    """``[(m, cond)]`` for the SVD-sampled sensing matrix ``diag(sigma_m) V_m'``.

    With `balanced`, the condition number is that of the balanced factor B,
    or NaN where the sensing matrix has a zero column and cannot be balanced.
    """
    D = dictionary.matrix if isinstance(dictionary, Dictionary) else np.asarray(dictionary, dtype=np.float64)
    out = []
    for m in m_list:
        sm = sensing_matrix(svd_measurement(D, int(m)), D)
        if not balanced:
            out.append((int(m), condition_number(sm.a)))
            continue
        try:
            out.append((int(m), condition_number(balance(sm.a, t_max).b)))
        except ZeroColumnError as exc:
            log.warning("m=%d: %s", m, exc)
            out.append((int(m), float("nan")))
    return out


def write_condition_csv(path, unbalanced: list, balanced: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "cond_unbalanced", "cond_balanced"])
        for (m, cu), (m2, cb) in zip(unbalanced, balanced):
            assert m == m2
            w.writerow([m, fmt(cu), fmt(cb)])


def write_trace_csv(path, truth, reconstruction, wavelengths=None) -> None:
    """Per-band truth vs reconstruction for one pixel."""
    truth = np.asarray(truth, dtype=np.float64)
    rec = np.asarray(reconstruction, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["band", "wavelength_nm", "truth", "reconstruction"])
        for b in range(truth.shape[0]):
            wl = "" if wavelengths is None else fmt(wavelengths[b])
            w.writerow([b, wl, fmt(truth[b]), fmt(rec[b])])


@dataclass
class RobustnessReport:
    cross_curve: ErrorCurve
    native_curve: ErrorCurve
    rmse_between_curves: float


def robustness_experiment(
    scene_a_train: SpectraSet,
    scene_b_train: SpectraSet,
    scene_b_test: SpectraSet,
    cfg: TrainConfig,
    spec: PipelineSpec | None = None,
    seed: int = 0,
) -> RobustnessReport:
    """Reconstruct scene B with a dictionary learned on scene A and with its own.

    ``rmse_between_curves`` is the root mean square over m of the difference
    of the two mean relative-error curves.
    """
    if not scene_a_train.d == scene_b_train.d == scene_b_test.d:
        raise DimensionError("all scenes must share the band count")
    spec = spec or pipeline("dsvd")
    if spec.sparsifier != "learned":
        raise ValidationError("robustness needs a learned-dictionary pipeline")
    dict_a = learn_dictionary(scene_a_train, cfg)
    dict_b = learn_dictionary(scene_b_train, cfg)
    # the scene-A dictionary never saw scene B, so only B's own training set is checked
    cross = run_pipeline(spec, None, scene_b_test, seed, dict_a)
    cross = replace(cross, pipeline=spec.name + ":cross")
    native = run_pipeline(spec, scene_b_train, scene_b_test, seed, dict_b)
    diff = np.asarray(cross.mean_rel_error) - np.asarray(native.mean_rel_error)
    return RobustnessReport(cross, native, float(np.sqrt(np.mean(diff**2))))
