"""Kernel interpolation, ridge-regularized fits and hold-out selection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, KslError, NumericalError, ValidationError
from .kernels import Kernel, cross_gram, gaussian_from_gamma, gram, kernel_from_config
from .linalg import solve_spd
from .rng import generator
from .sampling import SampleSet, bounding_box

__all__ = [
    "LabeledSet",
    "KernelModel",
    "HoldoutResult",
    "fit",
    "predict",
    "rmse",
    "holdout_select",
    "ridge_scale",
]

RIDGE_SCALINGS = ("unscaled", "times_m")


@dataclass(frozen=True)
class LabeledSet:
    """Sample points with responses."""

    samples: SampleSet
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != self.samples.m:
            raise DimensionMismatchError(f"{y.shape[0]} responses for {self.samples.m} points")
        if not np.all(np.isfinite(y)):
            raise ValidationError("responses must be finite")
        object.__setattr__(self, "y", y)

    @classmethod
    def from_arrays(cls, X, y, box=None) -> "LabeledSet":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(SampleSet(X, box if box is not None else bounding_box(X)), y)

    @property
    def points(self) -> np.ndarray:
        return self.samples.points

    @property
    def m(self) -> int:
        return self.samples.m

    def subset(self, idx) -> "LabeledSet":
        return LabeledSet(SampleSet(self.points[idx], self.samples.box, self.samples.seed), self.y[idx])


@dataclass(frozen=True)
class KernelModel:
    """Fitted expansion ``f(x) = sum_i a_i K(x_i, x)``.

    Attributes
    ----------
    solve_residual : float
        Relative 2-norm residual of the linear solve.
    train_residual : float
        ``max_i |(K a + lam m_scale a - y)_i|``.
    truncation_flag : bool
        True when the solver dropped near-null eigendirections.
    """

    kernel: Kernel
    centers: np.ndarray
    coefficients: np.ndarray
    lam: float
    ridge_scaling: str
    solve_residual: float
    train_residual: float
    truncation_flag: bool

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_config(),
            "centers": [[float(v) for v in row] for row in self.centers],
            "coefficients": [float(v) for v in self.coefficients],
            "lambda": float(self.lam),
            "ridge_scaling": self.ridge_scaling,
            "solve_residual": float(self.solve_residual),
            "train_residual": float(self.train_residual),
            "truncation_flag": bool(self.truncation_flag),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelModel":
        try:
            centers = np.asarray(data["centers"], dtype=float)
            coef = np.asarray(data["coefficients"], dtype=float)
            kernel = kernel_from_config(data["kernel"])
            lam = float(data["lambda"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed model: {exc}") from None
        if centers.ndim != 2 or coef.shape != (centers.shape[0],):
            raise ValidationError("model centers and coefficients disagree in shape")
        return cls(kernel, centers, coef, lam, data.get("ridge_scaling", "unscaled"),
                   float(data.get("solve_residual", float("nan"))),
                   float(data.get("train_residual", float("nan"))),
                   bool(data.get("truncation_flag", False)))


def ridge_scale(ridge_scaling: str, m: int) -> float:
    """Multiplier of ``lam`` on the diagonal: 1 or ``m``."""
    if ridge_scaling == "unscaled":
        return 1.0
    if ridge_scaling == "times_m":
        return float(m)
    raise ValidationError(f"ridge_scaling must be one of {RIDGE_SCALINGS}, got {ridge_scaling!r}")


def fit(data: LabeledSet, kernel: Kernel, lam: float = 0.0, ridge_scaling: str = "unscaled",
        allow_truncation: bool = True, gram_matrix: Optional[np.ndarray] = None) -> KernelModel:
    """Solve ``(K + lam m_scale I) a = y``.

    ``lam = 0`` is exact interpolation.  ``gram_matrix`` may be passed to
    reuse an already assembled kernel matrix.

    Raises
    ------
    NumericalError
        If the system is singular and truncation is disallowed.
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    X = data.points
    m = data.m
    K = gram(kernel, X) if gram_matrix is None else gram_matrix
    if K.shape != (m, m):
        raise DimensionMismatchError(f"Gram matrix has shape {K.shape}, expected ({m}, {m})")
    shift = lam * ridge_scale(ridge_scaling, m)
    A = K + shift * np.eye(m) if shift > 0 else K
    res = solve_spd(A, data.y, allow_truncation=allow_truncation)
    train = float(np.max(np.abs(A @ res.x - data.y)))
    return KernelModel(kernel, X.copy(), res.x, float(lam), ridge_scaling, res.residual, train, res.truncated)


def predict(model: KernelModel, points) -> np.ndarray:
    """Evaluate the fitted expansion at query points."""
    P = points.points if isinstance(points, SampleSet) else np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[None, :] if P.shape[0] == model.centers.shape[1] else P[:, None]
    if P.shape[1] != model.centers.shape[1]:
        raise DimensionMismatchError(f"model has d={model.centers.shape[1]}, query points have d={P.shape[1]}")
    return cross_gram(model.kernel, P, model.centers) @ model.coefficients


def rmse(model_or_pred, testset: LabeledSet) -> float:
    """Root mean square error on a labeled set.

    Accepts a model or an array of predictions.
    """
    if testset.m == 0:
        raise ValidationError("empty test set")
    pred = predict(model_or_pred, testset.points) if isinstance(model_or_pred, KernelModel) \
        else np.asarray(model_or_pred, dtype=float)
    return float(np.sqrt(np.mean((pred - testset.y) ** 2)))


@dataclass(frozen=True)
class HoldoutResult:
    """Hold-out selection outcome.

    ``table`` holds one ``(gamma, validation_rmse, error)`` triple per grid
    point; failed fits have ``nan`` and an error message.
    """

    gamma_star: float
    table: tuple
    train_index: np.ndarray
    valid_index: np.ndarray

    def to_dict(self) -> dict:
        return {"gamma_star": self.gamma_star,
                "table": [{"gamma": g, "rmse": r, "error": e} for g, r, e in self.table]}


KernelFamily = Union[str, Callable[[float], Kernel]]


def _family(kernel_family: KernelFamily, d: int) -> Callable[[float], Kernel]:
    if callable(kernel_family):
        return kernel_family
    if kernel_family in ("half", "canonical", "over_d"):
        return lambda g: gaussian_from_gamma(g, kernel_family, d)
    raise ValidationError(f"unknown kernel family {kernel_family!r}")


def holdout_split(m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into a training half of ``ceil(m/2)`` and the rest."""
    perm = generator(seed).permutation(m)
    k = (m + 1) // 2
    return np.sort(perm[:k]), np.sort(perm[k:])


def holdout_select(data: LabeledSet, kernel_family: KernelFamily, gamma_grid: Sequence[float],
                   lam: float = 0.0, seed: int = 0, ridge_scaling: str = "unscaled",
                   threads: int = 1) -> HoldoutResult:
    """Choose a kernel width by a single train/validation split.

    Parameters
    ----------
    data : LabeledSet
        At least four points.
    kernel_family : callable or str
        Maps ``gamma`` to a :class:`Kernel`; the strings ``"half"``,
        ``"over_d"`` and ``"canonical"`` select Gaussian conventions.
    gamma_grid : sequence of float
    lam : float
        Ridge parameter of every fit.
    seed : int
        Seed of the split.

    Returns
    -------
    HoldoutResult
        ``gamma_star`` minimizes validation RMSE; ties go to the smaller gamma.
    """
    if data.m < 4:
        raise ValidationError(f"hold-out needs at least 4 points, got {data.m}")
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ValidationError("empty gamma grid")
    make = _family(kernel_family, data.samples.d)
    tr, vl = holdout_split(data.m, seed)
    train, valid = data.subset(tr), data.subset(vl)

    def one(g):
        try:
            model = fit(train, make(g), lam, ridge_scaling)
            return g, rmse(model, valid), ""
        except KslError as exc:
            return g, float("nan"), str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = tuple(pool.map(one, grid))
    else:
        table = tuple(one(g) for g in grid)
    ok = [(r, g) for g, r, e in table if not e and math.isfinite(r)]
    if not ok:
        detail = "; ".join(f"gamma={g}: {e or 'non-finite rmse'}" for g, _, e in table)
        raise NumericalError(f"all hold-out fits failed: {detail}")
    best = min(ok)[1]
    return HoldoutResult(best, table, tr, vl)
