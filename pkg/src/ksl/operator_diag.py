"""Monte-Carlo estimators of the operator-difference quantities.

The population integral operator is replaced by the empirical operator of an
independent reference sample ``Dref``.  Both empirical operators live on the
pooled span ``H_Z = span{K_z : z in D and Dref}``.  With the pooled Gram
matrix factorized as ``G ~ F F^T`` (near-null directions below
``1e-12 * trace`` are dropped), the rows of ``F`` are coordinates of the
kernel sections in an orthonormal basis of ``H_Z``.  In those coordinates

    L_D = F_D^T F_D / m,    L_R = F_R^T F_R / m',

and both operators vanish on the orthogonal complement.  Every quantity
below is therefore an exact finite-dimensional matrix computation (the
complement contributes a factor ``lam / lam = 1`` to Q and nothing to the
others).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .bounds import BoundReport, grid_argmin
from .errors import DimensionMismatchError, NumericalError, ValidationError
from .kernels import Kernel, cross_gram, gram
from .sampling import SampleSet

__all__ = [
    "OperatorEstimates",
    "PooledOperators",
    "estimate_r",
    "estimate_r_dense",
    "estimate_q",
    "estimate_p_w_u",
    "estimate_p_fast",
    "estimate_u_fast",
    "estimate_all",
    "theorem2_bounds",
]

GRAM_TRUNCATION = 1e-12
RADICAND_TOL = 1e-12


def _points(S) -> np.ndarray:
    P = S.points if isinstance(S, SampleSet) else np.asarray(S, dtype=float)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValidationError("sample sets must be non-empty (m, d) arrays")
    return P


def _pair(D, Dref) -> tuple[np.ndarray, np.ndarray]:
    X, R = _points(D), _points(Dref)
    if X.shape[1] != R.shape[1]:
        raise DimensionMismatchError(f"D has d={X.shape[1]}, Dref has d={R.shape[1]}")
    return X, R


def _sum_sq_blocks(kernel: Kernel, X: np.ndarray, Y: Optional[np.ndarray], block: int = 2048) -> float:
    """``sum_ij K(x_i, y_j)^2`` accumulated over row blocks in a fixed order."""
    total = 0.0
    n = X.shape[0]
    for s in range(0, n, block):
        Xb = X[s:s + block]
        Kb = cross_gram(kernel, Xb, X if Y is None else Y)
        total += float(np.sum(Kb * Kb))
    return total


def estimate_r(D, Dref, kernel: Kernel) -> float:
    """Hilbert-Schmidt distance between the two empirical operators.

    Uses ``Tr[(K_x (x) K_x)(K_y (x) K_y)] = K(x, y)^2``, so that

        R^2 = S_DD / m^2 - 2 S_DR / (m m') + S_RR / m'^2

    with ``S_AB = sum K(a, b)^2``.
    """
    X, R = _pair(D, Dref)
    m, mr = X.shape[0], R.shape[0]
    sdd = _sum_sq_blocks(kernel, X, None)
    srr = _sum_sq_blocks(kernel, R, None)
    sdr = _sum_sq_blocks(kernel, X, R)
    rad = sdd / m ** 2 - 2.0 * sdr / (m * mr) + srr / mr ** 2
    scale = max(sdd / m ** 2, srr / mr ** 2, 1e-300)
    if rad < -RADICAND_TOL * max(scale, 1.0):
        raise NumericalError(f"negative Hilbert-Schmidt radicand {rad!r}")
    return math.sqrt(max(rad, 0.0))


class PooledOperators:
    """Both empirical operators represented on the pooled span ``H_Z``.

    Parameters
    ----------
    D, Dref : SampleSet or array
    kernel : Kernel
    """

    def __init__(self, D, Dref, kernel: Kernel):
        X, R = _pair(D, Dref)
        self.kernel = kernel
        self.X, self.R = X, R
        self.m, self.mr = X.shape[0], R.shape[0]
        Z = np.vstack([X, R])
        G = gram(kernel, Z)
        self.G = G
        w, V = scipy.linalg.eigh(G, check_finite=False)
        keep = w > GRAM_TRUNCATION * np.trace(G)
        if not np.any(keep):
            raise NumericalError("pooled Gram matrix is numerically zero", min_eig=float(w[0]))
        self.rank = int(keep.sum())
        F = V[:, keep] * np.sqrt(w[keep])
        self.F = F
        self.FD, self.FR = F[:self.m], F[self.m:]
        self.LD = self.FD.T @ self.FD / self.m
        self.LR = self.FR.T @ self.FR / self.mr
        self._wD, self._VD = scipy.linalg.eigh(self.LD, check_finite=False)
        self._wR, self._VR = scipy.linalg.eigh(self.LR, check_finite=False)
        self._wD = np.maximum(self._wD, 0.0)
        self._wR = np.maximum(self._wR, 0.0)

    def _inv_sqrt(self, which: str, lam: float) -> np.ndarray:
        w, V = (self._wD, self._VD) if which == "D" else (self._wR, self._VR)
        return (V / np.sqrt(w + lam)) @ V.T

    def q(self, lam: float) -> float:
        """``max(1, ||(L_D + lam)^{-1/2} (L_R + lam)^{1/2}||)``."""
        _check_lam(lam)
        T = self._inv_sqrt("D", lam)
        M = T @ (self.LR + lam * np.eye(self.rank)) @ T
        top = float(scipy.linalg.eigvalsh(M, subset_by_index=[self.rank - 1, self.rank - 1],
                                          check_finite=False)[0])
        return max(1.0, math.sqrt(max(top, 0.0)))

    def w(self, lam: float) -> float:
        """``||(L_R + lam)^{-1/2} (L_D - L_R)||``."""
        _check_lam(lam)
        M = self._inv_sqrt("R", lam) @ (self.LD - self.LR)
        return float(np.linalg.norm(M, 2))

    def _weighted_norm(self, g: np.ndarray, lam: float) -> float:
        c = self._VR.T @ g
        return math.sqrt(float(np.sum(c * c / (self._wR + lam))))

    def p(self, lam: float, residual: np.ndarray) -> float:
        """``||(L_R + lam)^{-1/2} (1/m) sum_i e_i K_{x_i}||`` with ``e = f*(x) - y``."""
        _check_lam(lam)
        e = np.asarray(residual, dtype=float)
        if e.shape != (self.m,):
            raise DimensionMismatchError(f"need {self.m} residuals, got {e.shape}")
        return self._weighted_norm(self.FD.T @ e / self.m, lam)

    def u(self, lam: float, fD: np.ndarray, fR: np.ndarray) -> float:
        """``||(L_R + lam)^{-1/2} (L_D f - L_R f)||`` from target values."""
        _check_lam(lam)
        fD = np.asarray(fD, dtype=float)
        fR = np.asarray(fR, dtype=float)
        if fD.shape != (self.m,) or fR.shape != (self.mr,):
            raise DimensionMismatchError("target values do not match the sample sizes")
        g = self.FD.T @ fD / self.m - self.FR.T @ fR / self.mr
        return self._weighted_norm(g, lam)

    def r(self) -> float:
        """Hilbert-Schmidt norm of ``L_D - L_R`` from the coordinate matrices."""
        return float(np.linalg.norm(self.LD - self.LR, "fro"))


def _check_lam(lam: float) -> None:
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError(f"lambda must be positive, got {lam}")


def estimate_r_dense(D, Dref, kernel: Kernel) -> float:
    """``R`` via explicit operator matrices on ``H_Z`` (small problems)."""
    return PooledOperators(D, Dref, kernel).r()


def estimate_q(D, Dref, kernel: Kernel, lam: float) -> float:
    """Empirical ``Q_{D,lam}`` with the reference sample as population proxy."""
    return PooledOperators(D, Dref, kernel).q(lam)


def _fvals(f_star, P: np.ndarray) -> np.ndarray:
    v = np.asarray(f_star(P), dtype=float).ravel()
    if v.shape != (P.shape[0],):
        raise DimensionMismatchError("f_star must return one value per point")
    return v


def estimate_p_w_u(D, Dref, kernel: Kernel, lam: float, f_star: Callable, y,
                   pooled: Optional[PooledOperators] = None) -> dict:
    """Empirical ``P``, ``W`` and ``U`` (with ``g = f*``) at one ``lam``."""
    ops = pooled if pooled is not None else PooledOperators(D, Dref, kernel)
    fD = _fvals(f_star, ops.X)
    fR = _fvals(f_star, ops.R)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != (ops.m,):
        raise DimensionMismatchError(f"need {ops.m} responses, got {y.shape}")
    return {"p_hat": ops.p(lam, fD - y), "w_hat": ops.w(lam), "u_hat": ops.u(lam, fD, fR)}


def _fast_norm(kernel: Kernel, X: np.ndarray, R: np.ndarray, cD: np.ndarray, cR: np.ndarray,
               lam: float, KRR: Optional[np.ndarray] = None) -> float:
    """``||(L_R + lam)^{-1/2} g||`` for ``g = sum cD_i K_{x_i} + sum cR_j K_{r_j}``.

    Woodbury on ``L_R = S^* S / m'`` gives
    ``<g, (L_R + lam)^{-1} g> = (||g||^2 - (Sg)^T (K_RR + m' lam I)^{-1} Sg) / lam``.
    """
    mr = R.shape[0]
    KDD = gram(kernel, X)
    KRD = cross_gram(kernel, R, X)
    KRR = gram(kernel, R) if KRR is None else KRR
    norm2 = cD @ KDD @ cD + 2.0 * cD @ (KRD.T @ cR) + cR @ KRR @ cR
    sg = KRD @ cD + KRR @ cR
    cho = scipy.linalg.cho_factor(KRR + mr * lam * np.eye(mr), lower=True, check_finite=False)
    val = (norm2 - sg @ scipy.linalg.cho_solve(cho, sg, check_finite=False)) / lam
    return math.sqrt(max(float(val), 0.0))


def estimate_p_fast(D, Dref, kernel: Kernel, lam: float, residual, KRR: Optional[np.ndarray] = None) -> float:
    """``P`` without the pooled eigendecomposition; ``residual = f*(x) - y``."""
    _check_lam(lam)
    X, R = _pair(D, Dref)
    e = np.asarray(residual, dtype=float).ravel()
    if e.shape != (X.shape[0],):
        raise DimensionMismatchError(f"need {X.shape[0]} residuals, got {e.shape}")
    return _fast_norm(kernel, X, R, e / X.shape[0], np.zeros(R.shape[0]), lam, KRR)


def estimate_u_fast(D, Dref, kernel: Kernel, lam: float, f_star: Callable,
                    KRR: Optional[np.ndarray] = None) -> float:
    """``U`` with ``g = f*`` without the pooled eigendecomposition."""
    _check_lam(lam)
    X, R = _pair(D, Dref)
    return _fast_norm(kernel, X, R, _fvals(f_star, X) / X.shape[0], -_fvals(f_star, R) / R.shape[0], lam, KRR)


@dataclass(frozen=True)
class OperatorEstimates:
    """Estimated operator quantities at one regularization parameter."""

    r_hat: float
    q_hat: float
    p_hat: float
    w_hat: float
    u_hat: float
    reference_size: int
    lam: float

    def to_dict(self) -> dict:
        return {"r_hat": self.r_hat, "q_hat": self.q_hat, "p_hat": self.p_hat, "w_hat": self.w_hat,
                "u_hat": self.u_hat, "reference_size": self.reference_size, "lambda": self.lam}


def estimate_all(D, Dref, kernel: Kernel, lam: float, f_star: Callable, y) -> OperatorEstimates:
    """All five estimates at ``lam``, sharing one pooled decomposition."""
    ops = PooledOperators(D, Dref, kernel)
    pwu = estimate_p_w_u(D, Dref, kernel, lam, f_star, y, pooled=ops)
    return OperatorEstimates(estimate_r(D, Dref, kernel), ops.q(lam), pwu["p_hat"], pwu["w_hat"],
                             pwu["u_hat"], ops.mr, float(lam))


Quantity = Union[Callable[[float], float], Sequence[float], None]


def _on_grid(f: Quantity, grid: np.ndarray, name: str) -> np.ndarray:
    if f is None:
        raise ValidationError(f"{name} is required for this bound")
    if callable(f):
        vals = np.array([float(f(t)) for t in grid])
    else:
        vals = np.asarray(f, dtype=float).ravel()
        if vals.shape != grid.shape:
            raise ValidationError(f"{name} has {vals.size} values for a grid of {grid.size}")
    if np.any(~np.isfinite(vals)) or np.any(vals < 0):
        raise ValidationError(f"{name} must be finite and nonnegative")
    return vals


def theorem2_bounds(q: Quantity, r: Optional[float], p: Quantity, w: Quantity, u: Quantity,
                    sigma_m_D: float, kappa: float, r_smooth: float, h_norm: float, f_inf: float,
                    lambda_grid: Sequence[float], mu_grid: Optional[Sequence[float]] = None,
                    q_mu: Quantity = None) -> dict:
    """Operator-level error bounds in the ``L^2`` norm.

    Quantities may be callables of the regularization parameter or arrays
    aligned with the grids.  ``q`` is sampled on ``lambda_grid``; the noisy
    term needs ``Q`` on ``mu_grid``, taken from ``q_mu`` or from ``q`` when
    it is callable or the grids coincide.

    Returns
    -------
    dict
        ``noise_free`` (``r >= 1/2``), ``noisy`` (``r >= 1/2`` and ``p`` given)
        and ``trans_native`` (``r < 1/2``), each a :class:`BoundReport` or None.
        ``f_inf`` enters only through ``u``, which the caller supplies.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size == 0:
        raise ValidationError("empty lambda grid")
    if np.any(lam <= 0):
        raise ValidationError("lambda grid must be positive")
    mu = lam if mu_grid is None else np.asarray(mu_grid, dtype=float)
    if mu.size == 0 or np.any(mu <= 0):
        raise ValidationError("mu grid must be non-empty and positive")
    for name, v in (("sigma_m_D", sigma_m_D), ("kappa", kappa), ("h_norm", h_norm), ("f_inf", f_inf)):
        if not (math.isfinite(v) and v > 0):
            raise ValidationError(f"{name} must be positive, got {v}")
    if r_smooth < 0:
        raise ValidationError(f"r_smooth must be >= 0, got {r_smooth}")
    Q = _on_grid(q, lam, "q")
    out = {"noise_free": None, "noisy": None, "trans_native": None}
    if r_smooth >= 0.5:
        if r_smooth <= 1.0:
            obj = lam ** r_smooth * Q ** (2 * r_smooth) * h_norm
            branch = "r_in_half_one"
        else:
            if r is None or r < 0:
                raise ValidationError("the r > 1 branch needs a nonnegative R estimate")
            obj = (r_smooth - 0.5) * kappa ** (r_smooth - 1.5) * h_norm * np.sqrt(lam) * Q * r
            branch = "r_gt_one"
        v, a = grid_argmin(obj, lam)
        nf = BoundReport(v, a, branch, None, {"lambda_grid": lam, "Q": Q, "objective": obj})
        out["noise_free"] = nf
        if p is not None:
            if q_mu is not None:
                Qm = _on_grid(q_mu, mu, "q_mu")
            elif callable(q) or np.array_equal(mu, lam):
                Qm = _on_grid(q, mu, "q") if callable(q) else Q
            else:
                raise ValidationError("Q on the mu grid is needed: pass q_mu or a callable q")
            P = _on_grid(p, mu, "p")
            sobj = (2.0 + mu / sigma_m_D) * Qm ** 2 * P
            sv, sm = grid_argmin(sobj, mu)
            out["noisy"] = BoundReport(sv + v, a, "noisy", sm,
                                       {"mu_grid": mu, "Q_mu": Qm, "P": P, "stability_objective": sobj,
                                        "stability_value": sv, "noise_free_value": v})
    else:
        W = _on_grid(w, lam, "w")
        U = _on_grid(u, lam, "u")
        stab = 1.0 + lam / sigma_m_D
        obj = ((1.0 + stab * Q ** (2 * r_smooth + 2)) * lam ** r_smooth * h_norm
               + (1.0 + stab) * Q ** 2 * U
               + lam ** (r_smooth - 0.5) * Q ** 2 * W * h_norm)
        v, a = grid_argmin(obj, lam)
        out["trans_native"] = BoundReport(v, a, "trans_native", None,
                                          {"lambda_grid": lam, "Q": Q, "W": W, "U": U, "objective": obj})
    return out
