"""Radial kernels: Gaussian and Sobolev spline.

The Gaussian is parameterized canonically as ``exp(-a * ||x - x'||^2)``.
Simulation code that speaks in terms of ``gamma`` converts at the edge with
:func:`gaussian_from_gamma`.

The Sobolev spline of smoothness ``tau`` on ``R^d`` is

    S(r) = 2 pi^d / Gamma(tau) * K_nu(r) * (r/2)^nu,   nu = tau - d/2,

with ``K_nu`` the modified Bessel function of the second kind.  It is
evaluated in log-space; at ``r = 0`` the analytic limit
``pi^d Gamma(nu) / Gamma(tau)`` is returned.  For half-integer ``nu`` the
product ``K_nu(r) (r/2)^nu`` is an exponential times a polynomial and is
evaluated vectorized and exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from ._bessel import bessel_k, log_bessel_k
from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "Kernel",
    "bessel_k",
    "log_bessel_k",
    "eval_kernel",
    "gram",
    "cross_gram",
    "gaussian_from_gamma",
    "kernel_from_config",
]

NU_MAX = 50.0


@dataclass(frozen=True)
class Kernel:
    """Immutable kernel description.

    Parameters
    ----------
    family : {"gaussian", "sobolev"}
    a : float, optional
        Gaussian parameter (units of 1/length**2).
    tau : float, optional
        Sobolev smoothness; needs ``0 < tau - d/2 <= 50``.
    d : int, optional
        Ambient dimension.  Required for Sobolev evaluation and kappa; may be
        left unset in configs and bound later with :meth:`bind`.
    """

    family: str
    a: Optional[float] = None
    tau: Optional[float] = None
    d: Optional[int] = None

    def __post_init__(self):
        if self.family == "gaussian":
            if self.a is None or not math.isfinite(self.a) or self.a <= 0:
                raise ValidationError(f"Gaussian kernel needs a > 0, got {self.a}")
        elif self.family == "sobolev":
            if self.tau is None or not math.isfinite(self.tau):
                raise ValidationError(f"Sobolev kernel needs a finite tau, got {self.tau}")
            if self.d is not None:
                _check_sobolev_order(self.tau, self.d)
        else:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if self.d is not None and (int(self.d) != self.d or self.d < 1):
            raise ValidationError(f"kernel dimension must be a positive integer, got {self.d}")

    @classmethod
    def gaussian(cls, a: float, d: Optional[int] = None) -> "Kernel":
        return cls("gaussian", a=float(a), d=d)

    @classmethod
    def sobolev(cls, tau: float, d: Optional[int] = None) -> "Kernel":
        return cls("sobolev", tau=float(tau), d=d)

    def bind(self, d: int) -> "Kernel":
        """Return a copy with the ambient dimension fixed to ``d``."""
        if self.d is not None and self.d != d:
            raise DimensionMismatchError(f"kernel bound to d={self.d}, data has d={d}")
        return Kernel(self.family, a=self.a, tau=self.tau, d=int(d))

    @property
    def nu(self) -> float:
        if self.family != "sobolev":
            raise ValidationError("nu is defined for the Sobolev family only")
        self._need_d()
        return self.tau - self.d / 2.0

    def _need_d(self):
        if self.d is None:
            raise ValidationError("Sobolev kernel needs its dimension d; call bind(d)")

    @property
    def diagonal(self) -> float:
        """Value ``K(x, x)``, which is also the supremum of the kernel."""
        if self.family == "gaussian":
            return 1.0
        self._need_d()
        return math.exp(_sobolev_log_limit(self.tau, self.d))

    @property
    def kappa(self) -> float:
        """``sqrt(sup K)``."""
        if self.family == "gaussian":
            return 1.0
        self._need_d()
        return math.exp(0.5 * _sobolev_log_limit(self.tau, self.d))

    def to_config(self) -> dict:
        if self.family == "gaussian":
            out = {"family": "gaussian", "a": self.a}
        else:
            out = {"family": "sobolev", "tau": self.tau}
        if self.d is not None:
            out["d"] = self.d
        return out

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)


def kernel_from_config(cfg: dict) -> Kernel:
    """Build a kernel from ``{"family": "gaussian", "a": ...}`` or
    ``{"family": "sobolev", "tau": ...}``."""
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ValidationError(f"kernel config must be an object with a 'family' key, got {cfg!r}")
    family = cfg["family"]
    unknown = set(cfg) - {"family", "a", "tau", "d"}
    if unknown:
        raise ValidationError(f"unknown kernel config keys {sorted(unknown)}")
    if family == "gaussian":
        if "a" not in cfg:
            raise ValidationError("Gaussian kernel config needs 'a'")
        return Kernel.gaussian(cfg["a"], cfg.get("d"))
    if family == "sobolev":
        if "tau" not in cfg:
            raise ValidationError("Sobolev kernel config needs 'tau'")
        return Kernel.sobolev(cfg["tau"], cfg.get("d"))
    raise ValidationError(f"unknown kernel family {family!r}")


def gaussian_from_gamma(gamma: float, convention: str = "half", d: Optional[int] = None) -> Kernel:
    """Gaussian kernel from a simulation-style width parameter.

    ``convention="half"`` means ``exp(-gamma ||x-x'||^2 / 2)`` (a = gamma/2);
    ``"over_d"`` means ``exp(-gamma ||x-x'||^2 / d)`` (a = gamma/d);
    ``"canonical"`` means a = gamma.
    """
    if convention == "half":
        return Kernel.gaussian(gamma / 2.0)
    if convention == "over_d":
        if d is None:
            raise ValidationError("the over_d convention needs d")
        return Kernel.gaussian(gamma / d)
    if convention == "canonical":
        return Kernel.gaussian(gamma)
    raise ValidationError(f"unknown gamma convention {convention!r}")


def _check_sobolev_order(tau: float, d: int) -> None:
    nu = tau - d / 2.0
    if not (0.0 < nu <= NU_MAX):
        raise ValidationError(f"Sobolev kernel needs 0 < tau - d/2 <= {NU_MAX:g}, got tau={tau}, d={d}")


def _sobolev_log_limit(tau: float, d: int) -> float:
    nu = tau - d / 2.0
    return d * math.log(math.pi) + math.lgamma(nu) - math.lgamma(tau)


def _half_integer_profile(n: int, r: np.ndarray) -> np.ndarray:
    """``K_{n+1/2}(r) (r/2)^{n+1/2}`` as ``exp(-r)`` times a polynomial."""
    # sqrt(pi/2) 2^{-(n+1/2)} e^{-r} sum_k (n+k)!/(k!(n-k)!) 2^{-k} r^{n-k}
    coefs = np.empty(n + 1)
    c = 1.0
    for k in range(n + 1):
        if k > 0:
            c *= (n + k) * (n - k + 1) / k
        coefs[k] = c * 2.0 ** (-k)
    poly = np.zeros_like(r)
    for k in range(n + 1):  # Horner in r, highest power r^n first (k = 0)
        poly = poly * r + coefs[k]
    return math.sqrt(math.pi / 2.0) * 2.0 ** (-(n + 0.5)) * np.exp(-r) * poly


def _is_half_integer(nu: float) -> bool:
    return (nu - 0.5) == round(nu - 0.5)


def sobolev_profile(tau: float, d: int, r, force_numeric: bool = False) -> np.ndarray:
    """Sobolev spline as a function of distance ``r >= 0`` (vectorized)."""
    _check_sobolev_order(tau, d)
    r = np.asarray(r, dtype=float)
    nu = tau - d / 2.0
    log_front = math.log(2.0) + d * math.log(math.pi) - math.lgamma(tau)
    if _is_half_integer(nu) and not force_numeric and nu < 25:
        return math.exp(log_front) * _half_integer_profile(int(round(nu - 0.5)), r)
    flat = r.ravel()
    out = np.empty_like(flat)
    limit = math.exp(_sobolev_log_limit(tau, d))
    uniq, inverse = np.unique(flat, return_inverse=True)
    vals = np.empty_like(uniq)
    for i, ri in enumerate(uniq):
        if ri == 0.0:
            vals[i] = limit
        else:
            lv = log_front + log_bessel_k(nu, ri) + nu * math.log(ri / 2.0)
            vals[i] = math.exp(lv)
    out[:] = vals[inverse]
    return out.reshape(r.shape)


def _as_points(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a point or a 2-D array of points")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite coordinates")
    return arr


def _profile(kernel: Kernel, sq: np.ndarray, d: int) -> np.ndarray:
    if kernel.family == "gaussian":
        return np.exp(-kernel.a * sq)
    k = kernel.bind(d)
    return sobolev_profile(k.tau, d, np.sqrt(sq))


def eval_kernel(kernel: Kernel, x, y) -> float:
    """Evaluate ``K(x, y)`` for two points.

    Examples
    --------
    >>> eval_kernel(Kernel.gaussian(0.5), [0.0, 0.0], [1.0, 1.0])  # doctest: +ELLIPSIS
    0.36787944117...
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatchError(f"points have dimensions {x.size} and {y.size}")
    if kernel.d is not None and x.size != kernel.d:
        raise DimensionMismatchError(f"kernel has d={kernel.d}, points have d={x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite coordinates")
    diff = x - y
    sq = float(np.dot(diff, diff))
    return float(_profile(kernel, np.array(sq), x.size))


def gram(kernel: Kernel, X) -> np.ndarray:
    """Symmetric Gram matrix ``(K(x_i, x_j))`` of a point set."""
    X = _as_points(X, "X")
    m, d = X.shape
    if kernel.d is not None and d != kernel.d:
        raise DimensionMismatchError(f"kernel has d={kernel.d}, points have d={d}")
    sq = squareform(pdist(X, "sqeuclidean")) if m > 1 else np.zeros((1, 1))
    return _profile(kernel, sq, d)


def cross_gram(kernel: Kernel, X, Y) -> np.ndarray:
    """Rectangular matrix ``(K(x_i, y_j))``."""
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(f"point sets have dimensions {X.shape[1]} and {Y.shape[1]}")
    d = X.shape[1]
    if kernel.d is not None and d != kernel.d:
        raise DimensionMismatchError(f"kernel has d={kernel.d}, points have d={d}")
    sq = cdist(X, Y, "sqeuclidean")
    return _profile(kernel, sq, d)
