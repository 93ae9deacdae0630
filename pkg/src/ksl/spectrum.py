"""Spectral quantities of kernel matrices.

Conventions: ``eigenvalues`` are those of the kernel matrix itself (not
divided by ``m``), and regularization parameters ``lam`` multiply ``m``
wherever the normalized operator would appear, e.g.

    N_D(lam) = sum_l s_l / (s_l + m lam).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ValidationError
from .kernels import Kernel, gram
from .linalg import eigen_sym, l2_condition_number
from .rng import derive_seed
from .sampling import sample_uniform

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "MULTI_LOG_C1",
    "EXP_DECAY_C2",
    "SpectralProfile",
    "DecaySpec",
    "CertifiedBounds",
    "MultiLogCheck",
    "clean_eigenvalues",
    "effective_dimension_empirical",
    "a_d_lambda",
    "spectral_profile",
    "effective_dimension_theoretical",
    "a_d_lambda_decay_shape",
    "effective_dimension_proxy",
    "b_m_lambda",
    "certified_bounds",
    "min_eig_lower_bound",
    "multi_log_integral",
    "multi_log_integral_check",
    "calibrate_multi_log_constant",
]

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-8, 1, 40))

CALIBRATION_ALPHAS = (0.5, 1.0, 2.0)
CALIBRATION_DIMS = (1, 2, 3)
CALIBRATION_LAMBDAS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, math.exp(-1.0), 0.4, 0.5)
CALIBRATION_SAFETY = 1.25

# 1.25 times the maximum of integral / shape over the calibration grid, as
# returned by calibrate_multi_log_constant().  The maximum sits at
# lam = 1/e, d = 3, where the guarded logarithm switches branch.
MULTI_LOG_C1 = 2.7052070160158763
# The exponential-decay effective dimension is the same integral, so it
# shares the constant.
EXP_DECAY_C2 = MULTI_LOG_C1

EIG_NEG_RTOL = 1e-10


def clean_eigenvalues(eigenvalues) -> np.ndarray:
    """Sort descending and zero out negative rounding noise.

    Values below ``-1e-10 * max|s|`` are not noise and raise.
    """
    w = np.sort(np.asarray(eigenvalues, dtype=float).ravel())[::-1]
    if w.size == 0:
        raise ValidationError("empty spectrum")
    if not np.all(np.isfinite(w)):
        raise ValidationError("spectrum has non-finite values")
    scale = float(np.max(np.abs(w)))
    if w[-1] < -EIG_NEG_RTOL * scale:
        raise ValidationError(f"spectrum has a significantly negative eigenvalue {w[-1]!r}")
    return np.maximum(w, 0.0)


def _check_lambda(lam):
    arr = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError(f"lambda must be positive and finite, got {lam}")
    return arr


def effective_dimension_empirical(eigenvalues, m: int, lam):
    """Empirical effective dimension ``sum_l s_l / (s_l + m lam)``.

    ``lam`` may be a scalar or an array; the result has its shape.

    Examples
    --------
    >>> effective_dimension_empirical([2.0, 1.0], 2, 0.5)  # 2/3 + 1/2
    1.1666666666666665
    """
    lam_arr = _check_lambda(lam)
    w = clean_eigenvalues(eigenvalues)
    out = (w[None, :] / (w[None, :] + m * lam_arr.reshape(-1, 1))).sum(axis=1)
    return float(out[0]) if lam_arr.ndim == 0 else out.reshape(lam_arr.shape)


def a_d_lambda(eigenvalues, m: int, lam):
    """``(1/(m lam) + 1/sqrt(m lam)) * max(1, sqrt(N_D(lam)))``."""
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    lam_arr = _check_lambda(lam)
    n = np.asarray(effective_dimension_empirical(eigenvalues, m, lam_arr))
    ml = m * lam_arr
    out = (1.0 / ml + 1.0 / np.sqrt(ml)) * np.maximum(1.0, np.sqrt(n))
    return float(out) if lam_arr.ndim == 0 else out


@dataclass
class SpectralProfile:
    """Spectrum of a kernel matrix with derived quantities on a grid.

    Attributes
    ----------
    eigenvalues : ndarray
        Descending, negative rounding noise clipped to zero.
    m : int
    cond : float
        ``max|s| / min|s|`` of the raw spectrum, ``inf`` if singular.
    min_eig : float
        Smallest raw (unclipped) eigenvalue.
    lambda_grid, n_d, a_d : ndarray
    """

    eigenvalues: np.ndarray
    m: int
    cond: float
    min_eig: float
    lambda_grid: np.ndarray
    n_d: np.ndarray
    a_d: np.ndarray

    def a_on(self, grid) -> np.ndarray:
        """``A_{D,lam}`` on an arbitrary grid (reusing stored values)."""
        grid = np.asarray(grid, dtype=float)
        if grid.shape == self.lambda_grid.shape and np.array_equal(grid, self.lambda_grid):
            return self.a_d
        return np.asarray(a_d_lambda(self.eigenvalues, self.m, grid), dtype=float).reshape(grid.shape)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "m": int(self.m),
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "n_d": [float(v) for v in self.n_d],
            "a_d": [float(v) for v in self.a_d],
            "cond": float(self.cond),
            "min_eig": float(self.min_eig),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralProfile":
        prof = spectral_profile(data["eigenvalues"], data.get("lambda_grid", DEFAULT_LAMBDA_GRID))
        if "min_eig" in data:
            prof.min_eig = float(data["min_eig"])
        if "cond" in data and data["cond"] is not None:
            prof.cond = float(data["cond"])
        return prof


def spectral_profile(eigenvalues, lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID) -> SpectralProfile:
    """Build a :class:`SpectralProfile` from raw kernel-matrix eigenvalues."""
    raw = np.sort(np.asarray(eigenvalues, dtype=float).ravel())[::-1]
    w = clean_eigenvalues(raw)
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("lambda grid must be a non-empty list")
    _check_lambda(grid)
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("lambda grid must be strictly ascending")
    m = w.size
    n_d = np.asarray(effective_dimension_empirical(w, m, grid)).reshape(grid.shape)
    a_d = np.asarray(a_d_lambda(w, m, grid)).reshape(grid.shape)
    return SpectralProfile(w, m, l2_condition_number(raw), float(raw[-1]), grid, n_d, a_d)


@dataclass(frozen=True)
class DecaySpec:
    """Eigenvalue decay model of the integral operator.

    ``algebraic``: ``s_l <= c0 l^{-beta}`` with ``beta > 1``.
    ``exponential``: ``s_l <= c0 exp(-alpha l^{1/d})``.
    """

    mode: str
    c0: float = 1.0
    beta: Optional[float] = None
    alpha: Optional[float] = None
    d: Optional[int] = None

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValidationError(f"c0 must be positive, got {self.c0}")
        if self.mode == "algebraic":
            if self.beta is None or not self.beta > 1:
                raise ValidationError(f"algebraic decay needs beta > 1, got {self.beta}")
        elif self.mode == "exponential":
            if self.alpha is None or not self.alpha > 0:
                raise ValidationError(f"exponential decay needs alpha > 0, got {self.alpha}")
            if self.d is None or int(self.d) != self.d or self.d < 1:
                raise ValidationError(f"exponential decay needs an integer d >= 1, got {self.d}")
        else:
            raise ValidationError(f"unknown decay mode {self.mode!r}")

    @classmethod
    def algebraic(cls, beta: float, c0: float = 1.0) -> "DecaySpec":
        return cls("algebraic", c0=c0, beta=beta)

    @classmethod
    def exponential(cls, alpha: float, d: int, c0: float = 1.0) -> "DecaySpec":
        return cls("exponential", c0=c0, alpha=alpha, d=d)


def effective_dimension_theoretical(spec: DecaySpec, lam: float) -> float:
    """Upper bound on the effective dimension under a decay model.

    Algebraic: ``c0^{1/beta} pi / (beta sin(pi/beta)) * lam^{-1/beta}``, the
    exact value of ``int_0^inf dt / (1 + (lam/c0) t^beta)``.

    Exponential: ``c2 d! alpha^{-d} max(log(c0/lam), 1)^d`` with the
    calibrated constant ``c2``.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError(f"lambda must be positive, got {lam}")
    if spec.mode == "algebraic":
        b = spec.beta
        c1 = spec.c0 ** (1.0 / b) * math.pi / (b * math.sin(math.pi / b))
        return c1 * lam ** (-1.0 / b)
    if lam > 1:
        raise ValidationError(f"exponential decay bound needs lambda <= 1, got {lam}")
    d, alpha = spec.d, spec.alpha
    log_term = max(math.log(spec.c0 / lam), 1.0)
    return EXP_DECAY_C2 * math.exp(math.lgamma(d + 1) - d * math.log(alpha) + d * math.log(log_term))


def a_d_lambda_decay_shape(spec: DecaySpec, m: int, lam: float, delta: float) -> float:
    """Shape of the high-probability bound on ``A_{D,lam}`` under a decay model,
    up to its absolute constant:
    ``(1/(m lam) + 1/sqrt(m lam)) (1 + 1/(m lam)) sqrt(N(lam)) log^2(4/delta)``
    with ``N`` from :func:`effective_dimension_theoretical`."""
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    ml = m * lam
    n = effective_dimension_theoretical(spec, lam)
    return (1 / ml + 1 / math.sqrt(ml)) * (1 + 1 / ml) * math.sqrt(max(n, 1.0)) * math.log(4 / delta) ** 2


def effective_dimension_proxy(kernel: Kernel, d: int, lam: float, box=(0.0, 1.0), size: int = 2000,
                              repeats: int = 1, seed: int = 0) -> float:
    """Stand-in for the population effective dimension ``N(lam)``.

    Mean of ``N_D(lam)`` over ``repeats`` independent uniform samples of
    ``size`` points; ``N_D`` of a large sample estimates ``N``.
    """
    if size < 1 or repeats < 1:
        raise ValidationError(f"size and repeats must be >= 1, got {size}, {repeats}")
    _check_lambda(lam)
    vals = []
    for i in range(repeats):
        S = sample_uniform(size, d, box, derive_seed(seed, "n-proxy", i))
        w = clean_eigenvalues(eigen_sym(gram(kernel, S.points)).eigenvalues)
        vals.append(effective_dimension_empirical(w, size, lam))
    return float(np.mean(vals))


def b_m_lambda(m: int, lam: float, kappa: float, n_lambda: float) -> float:
    """``(2 kappa / sqrt(m)) (kappa / sqrt(m lam) + sqrt(N(lam)))``."""
    if not (m >= 1 and lam > 0 and kappa > 0 and n_lambda >= 0):
        raise ValidationError(f"need m >= 1, lam > 0, kappa > 0, N >= 0; got {m}, {lam}, {kappa}, {n_lambda}")
    return 2 * kappa / math.sqrt(m) * (kappa / math.sqrt(m * lam) + math.sqrt(n_lambda))


@dataclass(frozen=True)
class CertifiedBounds:
    Q_bound: float
    W_bound: float
    P_bound: float
    U_bound: float

    def to_dict(self) -> dict:
        return {"Q_bound": self.Q_bound, "W_bound": self.W_bound,
                "P_bound": self.P_bound, "U_bound": self.U_bound}


def certified_bounds(A: float, lam: float, delta: float, kappa: float, M: float, f_inf: float) -> CertifiedBounds:
    """High-probability bounds on the operator quantities in terms of
    ``A = A_{D,lam}``; every bound carries the factor ``log^2(8/delta)``."""
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if not (lam > 0 and kappa > 0 and M > 0 and f_inf > 0 and A >= 0):
        raise ValidationError("need lam, kappa, M, f_inf > 0 and A >= 0")
    L = math.log(8.0 / delta) ** 2
    c = kappa * (kappa + 8.0)
    root = math.sqrt(lam) * A
    return CertifiedBounds(
        Q_bound=math.sqrt(2.0) * (2.0 * c * A + 1.0) * L,
        W_bound=2.0 * c * root * L,
        P_bound=4.0 * M * (kappa + 8.0) * root * L,
        U_bound=2.0 * (f_inf * (kappa + 8.0) / kappa) * root * L,
    )


def min_eig_lower_bound(kernel: Kernel, q: float, d: int, m: Optional[int] = None,
                        squared_exponent: bool = False, log: bool = False) -> float:
    """Lower bound on ``s_min / m`` from the separation radius ``q``.

    Gaussian ``exp(-a r^2)``, with ``u = 6.38 d / (q sqrt(a))``::

        u^d exp(-u) / (2^{2d+1} Gamma(d/2 + 1))

    (``exp(-u^2)`` with ``squared_exponent=True``).  Sobolev of order tau::

        q^{2tau-d} (6.38 d)^{-(2tau-d)} (1 + q^2/(162.8 d^2))^{-tau}
            / (2^{2tau+2d+1} pi^{d/2} Gamma(d/2 + 1))

    Both are assembled in log-space; ``log=True`` returns the logarithm,
    which stays finite where the value underflows.  ``m`` is accepted for
    interface symmetry; the bounds do not depend on it.
    """
    if not (math.isfinite(q) and q > 0):
        raise ValidationError(f"separation radius must be positive, got {q}")
    if int(d) != d or d < 1:
        raise ValidationError(f"d must be a positive integer, got {d}")
    if kernel.family == "gaussian":
        u = 6.38 * d / (q * math.sqrt(kernel.a))
        expo = u * u if squared_exponent else u
        log_b = -(2 * d + 1) * math.log(2.0) - math.lgamma(d / 2 + 1) + d * math.log(u) - expo
        return log_b if log else math.exp(log_b)
    if kernel.family == "sobolev":
        tau = kernel.tau
        if not tau > d / 2:
            raise ValidationError(f"Sobolev bound needs tau > d/2, got tau={tau}, d={d}")
        s = 2 * tau - d
        log_b = (s * math.log(q) - (2 * tau + 2 * d + 1) * math.log(2.0) - 0.5 * d * math.log(math.pi)
                 - math.lgamma(d / 2 + 1) - s * math.log(6.38 * d)
                 - tau * math.log1p(q * q / (162.8 * d * d)))
        return log_b if log else math.exp(log_b)
    raise ValidationError(f"unsupported kernel family {kernel.family!r}")


def multi_log_integral(alpha: float, d: int, lam: float, rtol: float = 1e-10) -> float:
    """``int_0^inf dt / (1 + lam exp(alpha t^{1/d}))`` by adaptive quadrature.

    With ``t = s^d`` the integrand becomes
    ``d s^{d-1} e^{-alpha s} / (e^{-alpha s} + lam)``, which is smooth and
    decays exponentially; the range is split where ``lam e^{alpha s} = 1``.
    """
    if not (alpha > 0 and int(d) == d and d >= 1 and 0 < lam < 1):
        raise ValidationError(f"need alpha > 0, integer d >= 1 and 0 < lam < 1; got {alpha}, {d}, {lam}")
    d = int(d)

    def f(s):
        e = math.exp(-alpha * s)
        return d * s ** (d - 1) * e / (e + lam)

    s0 = math.log(1.0 / lam) / alpha
    head, _ = quad(f, 0.0, s0, epsabs=0.0, epsrel=rtol, limit=200)
    tail, _ = quad(f, s0, math.inf, epsabs=0.0, epsrel=rtol, limit=200)
    return head + tail


def _multi_log_shape(alpha: float, d: int, lam: float) -> float:
    return math.exp(math.lgamma(d + 1) - d * math.log(alpha) + d * math.log(max(math.log(1.0 / lam), 1.0)))


@dataclass(frozen=True)
class MultiLogCheck:
    integral: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.integral <= self.bound

    @property
    def ratio(self) -> float:
        return self.integral / self.bound


def multi_log_integral_check(alpha: float, d: int, lam: float) -> MultiLogCheck:
    """Quadrature value and the bound ``C1 d! alpha^{-d} max(log(1/lam), 1)^d``."""
    integral = multi_log_integral(alpha, d, lam)
    return MultiLogCheck(integral, MULTI_LOG_C1 * _multi_log_shape(alpha, d, lam))


def calibrate_multi_log_constant() -> float:
    """Recompute ``MULTI_LOG_C1`` from the calibration grid."""
    worst = 0.0
    for alpha in CALIBRATION_ALPHAS:
        for d in CALIBRATION_DIMS:
            for lam in CALIBRATION_LAMBDAS:
                worst = max(worst, multi_log_integral(alpha, d, lam) / _multi_log_shape(alpha, d, lam))
    return CALIBRATION_SAFETY * worst
