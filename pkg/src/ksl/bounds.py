"""Spectrum-based error bounds for kernel interpolation and rate formulas.

Every bound is a minimum over a finite grid of regularization parameters.
Grids are scanned exhaustively and ties go to the smallest parameter.  By
default absolute constants and confidence factors are left out, so the
values are the "AE" shapes plotted in simulations.  With
``include_constants=True`` the explicit constants from the proofs are
applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .spectrum import DEFAULT_LAMBDA_GRID, SpectralProfile

__all__ = [
    "BoundConfig",
    "BoundReport",
    "grid_argmin",
    "constant_c1",
    "constant_c2",
    "constant_c3",
    "ae_noise_free",
    "ae_noisy",
    "ae_trans_native",
    "corollary_rates",
]

BRANCHES = ("r_in_half_one", "r_gt_one", "trans_native", "noisy")


@dataclass(frozen=True)
class BoundConfig:
    """Parameters shared by the spectrum-based bounds.

    Attributes
    ----------
    r_smooth : float
        Regularity exponent ``r`` of the target.
    delta : float
        Confidence parameter in (0, 1); only used with constants.
    h_norm : float
        Stand-in for the norm of the source element ``h``.
    lambda_grid, mu_grid : tuple of float
        Ascending positive grids.
    include_constants : bool
    kappa : float
        Square root of the kernel supremum.
    f_inf : float
        Stand-in for the sup norm of the target.
    parenthesization : {"operator", "literal"}
        Reading of the ambiguous first term of the trans-native bound.
    """

    r_smooth: float = 0.5
    delta: float = 0.1
    h_norm: float = 1.0
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    mu_grid: tuple = DEFAULT_LAMBDA_GRID
    include_constants: bool = False
    kappa: float = 1.0
    f_inf: float = 1.0
    parenthesization: str = "operator"

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if not (math.isfinite(self.r_smooth) and self.r_smooth >= 0):
            raise ValidationError(f"r_smooth must be >= 0, got {self.r_smooth}")
        if not self.h_norm > 0 or not self.kappa > 0 or not self.f_inf > 0:
            raise ValidationError("h_norm, kappa and f_inf must be positive")
        for name in ("lambda_grid", "mu_grid"):
            g = tuple(float(v) for v in getattr(self, name))
            if not g:
                raise ValidationError(f"{name} is empty")
            if any(not (math.isfinite(v) and v > 0) for v in g):
                raise ValidationError(f"{name} must hold positive finite values")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValidationError(f"{name} must be strictly ascending")
            object.__setattr__(self, name, g)
        if self.parenthesization not in ("operator", "literal"):
            raise ValidationError(f"unknown parenthesization {self.parenthesization!r}")


@dataclass
class BoundReport:
    """A minimized bound with its minimizer and intermediate terms."""

    value: float
    argmin_lambda: Optional[float]
    branch: str
    argmin_mu: Optional[float] = None
    terms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v]
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, BoundReport):
                return v.to_dict()
            return v
        return {"value": self.value, "argmin_lambda": self.argmin_lambda, "argmin_mu": self.argmin_mu,
                "branch": self.branch, "terms": {k: conv(v) for k, v in self.terms.items()}}


def grid_argmin(values, grid) -> tuple[float, float]:
    """Minimum of ``values`` and the grid point attaining it (first on ties)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("empty grid")
    if np.any(np.isnan(v)):
        raise ValidationError("bound objective produced NaN")
    i = int(np.argmin(v))
    return float(v[i]), float(np.asarray(grid, dtype=float)[i])


def _cmax(kappa: float) -> float:
    return max(2.0 * kappa * (kappa + 8.0), 1.0)


def constant_c1(r: float, kappa: float, h_norm: float) -> float:
    """Constant of the noise-free bound (it already contains ``h_norm``)."""
    c = _cmax(kappa)
    if r <= 1.0:
        return 2.0 ** r * h_norm * c ** (2.0 * r)
    return 2.0 * math.sqrt(2.0) * (r - 0.5) * kappa ** (r + 0.5) * h_norm * c


def constant_c2(kappa: float, f_inf: float, gamma_noise: float) -> float:
    """Constant of the stability term in the noisy bound."""
    return 16.0 * (f_inf + gamma_noise) * (kappa + 8.0) * _cmax(kappa)


def constant_c3(r: float, kappa: float, h_norm: float, f_inf: float) -> float:
    """Constant of the trans-native bound."""
    c = _cmax(kappa)
    return c ** (2 * r + 2) * max(2.0 ** (r + 1) * h_norm,
                                  (2.0 * f_inf / kappa + kappa * h_norm) * 2.0 * kappa * (kappa + 8.0))


def _noise_free_objective(A: np.ndarray, grid: np.ndarray, r: float, m: int) -> tuple[np.ndarray, str]:
    if r <= 1.0:
        return grid ** r * (A + 1.0) ** (2.0 * r), "r_in_half_one"
    return np.sqrt(grid) * (A + 1.0) / math.sqrt(m), "r_gt_one"


def ae_noise_free(profile: SpectralProfile, cfg: BoundConfig) -> BoundReport:
    """Noise-free bound for targets with regularity ``r >= 1/2``.

    ``r`` in [1/2, 1]: ``min_lam lam^r (A + 1)^{2r}``.
    ``r > 1``: ``m^{-1/2} min_lam sqrt(lam) (A + 1)``.
    Here ``A = A_{D,lam}``.  With constants the value is multiplied by
    ``C1 log^6(16/delta)``.
    """
    r = cfg.r_smooth
    if r < 0.5:
        raise ValidationError(f"noise-free bound needs r >= 1/2, got {r}")
    grid = np.asarray(cfg.lambda_grid)
    A = profile.a_on(grid)
    obj, branch = _noise_free_objective(A, grid, r, profile.m)
    value, lam = grid_argmin(obj, grid)
    terms = {"lambda_grid": grid, "A": A, "objective": obj, "shape_value": value}
    if cfg.include_constants:
        factor = constant_c1(r, cfg.kappa, cfg.h_norm) * math.log(16.0 / cfg.delta) ** 6
        terms["constant"] = factor
        value *= factor
    return BoundReport(value, lam, branch, None, terms)


def _sigma_min(profile: SpectralProfile) -> float:
    s = float(profile.min_eig)
    if not s > 0:
        raise ValidationError(f"bound needs a positive smallest eigenvalue, got {s}")
    return s


def ae_noisy(profile: SpectralProfile, cfg: BoundConfig, gamma_noise: float = 0.0) -> BoundReport:
    """Noisy-data bound: a stability term plus the noise-free bound.

    The stability term is
    ``min_mu (1 + mu m / s_min) (A_mu + 1)^2 sqrt(mu) A_mu``, with
    ``s_min`` the smallest kernel-matrix eigenvalue.
    """
    if gamma_noise < 0:
        raise ValidationError(f"noise level must be >= 0, got {gamma_noise}")
    s_min = _sigma_min(profile)
    m = profile.m
    base = ae_noise_free(profile, cfg)
    mu = np.asarray(cfg.mu_grid)
    A = profile.a_on(mu)
    obj = (1.0 + mu * m / s_min) * (A + 1.0) ** 2 * np.sqrt(mu) * A
    stab, mu_star = grid_argmin(obj, mu)
    terms = {"mu_grid": mu, "A_mu": A, "stability_objective": obj, "stability_shape": stab,
             "noise_free": base.to_dict()}
    if cfg.include_constants:
        factor = constant_c2(cfg.kappa, cfg.f_inf, gamma_noise) * math.log(16.0 / cfg.delta) ** 6
        terms["stability_constant"] = factor
        stab *= factor
    terms["stability_value"] = stab
    return BoundReport(stab + base.value, base.argmin_lambda, "noisy", mu_star, terms)


def trans_native_objective(A: np.ndarray, grid: np.ndarray, r: float, m: int, s_min: float,
                           parenthesization: str = "operator") -> np.ndarray:
    """Grid objective of the trans-native bound (without constants)."""
    stab = 1.0 + grid * m / s_min
    if parenthesization == "operator":
        first = (1.0 + stab * (A + 1.0) ** (2 * r + 2)) * grid ** r
    else:
        first = (1.0 + stab * A + 1.0) ** (2 * r + 2) * grid ** r
    second = (stab + grid ** (r - 0.5)) * (A + 1.0) ** 2 * np.sqrt(grid) * A
    return first + second


def ae_trans_native(profile: SpectralProfile, cfg: BoundConfig) -> BoundReport:
    """Bound for rough targets, ``0 < r < 1/2``, outside the native space."""
    r = cfg.r_smooth
    if not 0 < r < 0.5:
        raise ValidationError(f"trans-native bound needs 0 < r < 1/2, got {r}")
    s_min = _sigma_min(profile)
    grid = np.asarray(cfg.lambda_grid)
    A = profile.a_on(grid)
    obj = trans_native_objective(A, grid, r, profile.m, s_min, cfg.parenthesization)
    value, lam = grid_argmin(obj, grid)
    terms = {"lambda_grid": grid, "A": A, "objective": obj, "shape_value": value,
             "parenthesization": cfg.parenthesization}
    if cfg.include_constants:
        factor = constant_c3(r, cfg.kappa, cfg.h_norm, cfg.f_inf) * math.log(24.0 / cfg.delta) ** 6
        terms["constant"] = factor
        value *= factor
    return BoundReport(value, lam, "trans_native", None, terms)


def corollary_rates(kind: str, m: float, d: int, tau_or_a: float, r_smooth: float, log: bool = False) -> float:
    """Convergence-rate shapes for Sobolev and Gaussian kernels.

    Sobolev (``tau > d/2``): ``m^{-2 r tau/(2 tau + d)}`` for r in [1/2, 1],
    ``m^{-(2 tau + d/2)/(2 tau + d)}`` for r > 1.

    Gaussian (width ``a``): ``sqrt(d) a^{-d/2} (log^d m / m)^r`` for r in
    [1/2, 1], ``sqrt(d) a^{-d/2} log^{d/2} m / m`` for r > 1.

    The value is assembled as a logarithm; ``log=True`` returns it.  Values
    beyond the float range come back as ``inf``.
    """
    if r_smooth < 0.5:
        raise ValidationError(f"rates need r >= 1/2, got {r_smooth}")
    if not m > 1:
        raise ValidationError(f"rates need m > 1, got {m}")
    if int(d) != d or d < 1:
        raise ValidationError(f"d must be a positive integer, got {d}")
    log_m = math.log(m)
    if kind == "sobolev":
        tau = tau_or_a
        if not tau > d / 2:
            raise ValidationError(f"Sobolev rate needs tau > d/2, got tau={tau}, d={d}")
        if r_smooth <= 1:
            value = -2 * r_smooth * tau / (2 * tau + d) * log_m
        else:
            value = -(2 * tau + d / 2) / (2 * tau + d) * log_m
    elif kind == "gaussian":
        a = tau_or_a
        if not a > 0:
            raise ValidationError(f"Gaussian rate needs a > 0, got {a}")
        front = 0.5 * math.log(d) - 0.5 * d * math.log(a)
        if r_smooth <= 1:
            value = front + r_smooth * (d * math.log(log_m) - log_m)
        else:
            value = front + 0.5 * d * math.log(log_m) - log_m
    else:
        raise ValidationError(f"unknown rate kind {kind!r}")
    if log:
        return value
    return math.exp(value) if value < 709.78 else math.inf
