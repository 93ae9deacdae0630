"""Dense symmetric linear algebra.

Two eigensolvers are provided.  :func:`jacobi_eigh` is a cyclic Jacobi
method in round-robin ordering, where each sweep applies batches of disjoint
rotations.  It computes small eigenvalues to high relative accuracy on
positive definite input.  :func:`eigen_sym` dispatches to it or to LAPACK.
LAPACK is the default for the O(m^3) workloads of the simulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

__all__ = [
    "EigenDecomposition",
    "SolveResult",
    "as_symmetric",
    "jacobi_eigh",
    "eigen_sym",
    "solve_spd",
    "condition_number",
    "l2_condition_number",
]

ASYMMETRY_TOL = 1e-12
TRUNCATION_RTOL = 1e-14


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue.

    Attributes
    ----------
    eigenvalues : ndarray, shape (m,)
    eigenvectors : ndarray, shape (m, m)
        Column ``k`` pairs with ``eigenvalues[k]``.
    method : str
    sweeps : int
        Jacobi sweeps used (0 for LAPACK).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    method: str = "lapack"
    sweeps: int = 0

    @property
    def m(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


@dataclass(frozen=True)
class SolveResult:
    """Solution of a symmetric positive (semi)definite system.

    Attributes
    ----------
    x : ndarray
    residual : float
        Relative residual ``||Ax - b|| / ||b||`` (absolute if ``b = 0``).
    truncated : bool
        True when the spectral fallback dropped eigenvalues.
    method : {"cholesky", "spectral"}
    min_eig : float or None
        Smallest eigenvalue, known only on the spectral path.
    """

    x: np.ndarray
    residual: float
    truncated: bool
    method: str
    min_eig: float | None = None


def as_symmetric(A, name: str = "matrix") -> np.ndarray:
    """Validate and return ``A`` as a square, finite, symmetric float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = np.max(np.abs(A))
    if scale > 0 and np.max(np.abs(A - A.T)) > ASYMMETRY_TOL * scale:
        raise ValidationError(f"{name} is not symmetric within {ASYMMETRY_TOL:g} relative")
    return A


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for one Jacobi sweep: n-1 rounds of disjoint (p, q) pairs."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            rounds.append((np.array(ps), np.array(qs)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol: float = 1e-13, max_sweeps: int = 64) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (m, m)
    tol : float
        Stop when the off-diagonal Frobenius norm is below ``tol * ||A||_F``
        and every off-diagonal entry is negligible relative to its diagonal
        pair, ``|a_pq| <= eps * sqrt(|a_pp a_qq|)``.
    max_sweeps : int
        Hard cap on sweeps.

    Returns
    -------
    EigenDecomposition
    """
    A = as_symmetric(A).copy()
    m = A.shape[0]
    V = np.eye(m)
    norm = np.linalg.norm(A)
    eps = np.finfo(float).eps
    rounds = _round_robin(m)
    sweeps = 0
    iu = np.triu_indices(m, 1)
    for sweeps in range(1, max_sweeps + 1):
        off = A[iu]
        diag = np.abs(np.diag(A))
        rel_ok = np.all(np.abs(off) <= eps * np.sqrt(diag[iu[0]] * diag[iu[1]]))
        if np.sqrt(2.0) * np.linalg.norm(off) < tol * norm and rel_ok:
            sweeps -= 1
            break
        if np.all(off == 0.0):
            sweeps -= 1
            break
        for p, q in rounds:
            apq = A[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = A[p, p], A[q, q]
            zeta = (aqq - app) / (2.0 * apq)
            t = np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t[zeta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # Columns then rows; the pairs are disjoint so one batch is exact.
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    else:
        raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], V[:, order], method="jacobi", sweeps=sweeps)


def eigen_sym(A, method: str = "lapack") -> EigenDecomposition:
    """Symmetric eigendecomposition with descending eigenvalues.

    Parameters
    ----------
    A : array_like, shape (m, m)
    method : {"lapack", "jacobi"}
    """
    if method == "jacobi":
        return jacobi_eigh(A)
    if method != "lapack":
        raise ValidationError(f"unknown eigensolver {method!r}")
    A = as_symmetric(A)
    w, V = scipy.linalg.eigh(A, check_finite=False)
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], V[:, order], method="lapack")


def _rel_residual(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


def solve_spd(A, b, allow_truncation: bool = True, refine: int = 1) -> SolveResult:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Cholesky is tried first, followed by ``refine`` steps of iterative
    refinement.  If the factorization breaks down, a spectral pseudo-solve
    drops eigenvalues below ``1e-14 * sigma_1`` and flags the result as
    truncated.

    Raises
    ------
    NumericalError
        If Cholesky fails and truncation is disallowed or leaves nothing.
    """
    A = as_symmetric(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ValidationError(f"right-hand side has length {b.shape[0]}, matrix has order {A.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValidationError("right-hand side has non-finite entries")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        if not np.all(np.diag(factor[0]) > 0):
            raise np.linalg.LinAlgError("non-positive pivot")
    except np.linalg.LinAlgError:
        factor = None
    if factor is not None:
        x = scipy.linalg.cho_solve(factor, b, check_finite=False)
        for _ in range(refine):
            x = x + scipy.linalg.cho_solve(factor, b - A @ x, check_finite=False)
        if np.all(np.isfinite(x)):
            return SolveResult(x, _rel_residual(A, x, b), False, "cholesky")
    dec = eigen_sym(A)
    w, V = dec.eigenvalues, dec.eigenvectors
    smallest = float(w[-1])
    keep = w > TRUNCATION_RTOL * w[0] if w[0] > 0 else np.zeros_like(w, dtype=bool)
    truncated = not np.all(keep)
    if not np.any(keep) or (truncated and not allow_truncation):
        raise NumericalError("numerically singular", min_eig=smallest,
                             cond=l2_condition_number(w))
    coef = (V[:, keep].T @ b) / w[keep]
    x = V[:, keep] @ coef
    return SolveResult(x, _rel_residual(A, x, b), truncated, "spectral", smallest)


def condition_number(dec: EigenDecomposition) -> float:
    """``sigma_1 / sigma_m`` of a positive definite matrix.

    Raises
    ------
    NumericalError
        If ``sigma_m <= 0``.
    """
    w = np.asarray(dec.eigenvalues if isinstance(dec, EigenDecomposition) else dec, dtype=float)
    if w[-1] <= 0:
        raise NumericalError("not positive definite", min_eig=float(w[-1]))
    return float(w[0] / w[-1])


def l2_condition_number(eigenvalues) -> float:
    """Spectral-norm condition number ``max|sigma| / min|sigma|``.

    Unlike :func:`condition_number` this accepts matrices whose smallest
    computed eigenvalue is rounding noise of either sign; returns ``inf``
    when some eigenvalue is exactly zero.
    """
    a = np.abs(np.asarray(eigenvalues, dtype=float))
    lo = a.min()
    return float(a.max() / lo) if lo > 0 else float("inf")
