"""Dense matrix functions: exponential, Gramian integral, guarded solves."""

import warnings

import numpy as np
import scipy.linalg as la

from .errors import DomainError, NonFiniteError, SingularMatrixError

__all__ = ["expm", "gramian_block", "gramian_quadrature", "LinearSolver", "solve_linear"]

SINGULAR_RTOL = 1e-13


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("matrix function input contains non-finite entries")


def expm(M, t=1.0):
    """Return ``exp(t * M)`` (scaling-and-squaring Pade, via scipy)."""
    M = np.asarray(M, dtype=float)
    _check_finite(M, np.asarray(t, dtype=float))
    return la.expm(t * M)


def gramian_block(lam, S, t):
    """Gramian ``int_0^t exp((t-s) lam) S exp((t-s) lam.T) ds``.

    Van Loan's construction: exponentiate ``[[lam, S], [0, -lam.T]] * t``.
    The upper-right block ``F12`` equals
    ``int_0^t exp((t-s) lam) S exp(-s lam.T) ds``, so the Gramian is
    ``F12 @ exp(t lam).T``.
    """
    lam = np.asarray(lam, dtype=float)
    S = np.asarray(S, dtype=float)
    _check_finite(lam, S)
    if t < 0:
        raise DomainError(f"Gramian horizon must be non-negative, got {t}")
    n = lam.shape[0]
    if t == 0:
        return np.zeros((n, n))
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = lam
    block[:n, n:] = S
    block[n:, n:] = -lam.T
    F = la.expm(t * block)
    psi = F[:n, n:] @ F[:n, :n].T
    return 0.5 * (psi + psi.T)


def gramian_quadrature(lam, S, t, **quad_kw):
    """Adaptive-quadrature Gramian; an independent check on :func:`gramian_block`."""
    from scipy.integrate import quad_vec

    lam = np.asarray(lam, dtype=float)
    S = np.asarray(S, dtype=float)
    if t < 0:
        raise DomainError(f"Gramian horizon must be non-negative, got {t}")
    quad_kw.setdefault("epsabs", 1e-13)
    quad_kw.setdefault("epsrel", 1e-12)

    def integrand(s):
        E = la.expm((t - s) * lam)
        return E @ S @ E.T

    val, _ = quad_vec(integrand, 0.0, t, **quad_kw)
    return val


class LinearSolver:
    """LU factorisation of ``H`` with an explicit singularity test.

    Raises :class:`SingularMatrixError` when some pivot falls below
    ``1e-13 * ||H||_inf``; with ``H`` from the game setup this means the
    open-loop Nash equilibrium is not unique.
    """

    def __init__(self, H):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        _check_finite(H)
        self.H = H
        scale = np.linalg.norm(H, np.inf)
        if scale == 0.0:
            raise SingularMatrixError("matrix is identically zero")
        with warnings.catch_warnings():
            # exact zero pivots are reported below as SingularMatrixError
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(H, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= SINGULAR_RTOL * scale:
            raise SingularMatrixError(
                f"matrix is numerically singular (min pivot {pivots.min():.3e}, norm {scale:.3e})"
            )
        self._lu = (lu, piv)

    def solve(self, B, trans=False):
        B = np.asarray(B, dtype=float)
        if B.shape[0] != self.H.shape[0]:
            raise ValueError("right-hand side row count does not match H")
        return la.lu_solve(self._lu, B, trans=1 if trans else 0, check_finite=False)


def solve_linear(H, B):
    """Solve ``H X = B`` without forming an inverse."""
    return LinearSolver(H).solve(B)
