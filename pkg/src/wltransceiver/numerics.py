"""Small dense complex linear algebra used throughout the package.

All matrices handled here are tiny (at most a few dozen rows), so the
routines favour clarity and determinism over speed.
"""

import numpy as np
from scipy import linalg

__all__ = ['NotPositiveDefinite', 'hermitian_solve', 'top_eigenpair',
           'backward_identity', 'is_hermitian']


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization meets a non-positive pivot."""


def is_hermitian(a, rtol=1e-12):
    """Return True if ``max|A - A^H| <= rtol * max|A|``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = np.max(np.abs(a)) if a.size else 0.0
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= rtol * scale)


def hermitian_solve(a, b):
    """
    Solve ``A x = b`` for Hermitian positive-definite ``A``.

    Parameters
    ----------
    a : (n, n) complex array
        Hermitian positive-definite matrix. Only the lower triangle is read.
    b : (n,) or (n, k) complex array
        Right-hand side(s).

    Returns
    -------
    x : complex array with the shape of `b`

    Raises
    ------
    NotPositiveDefinite
        If the Cholesky factorization fails.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] == 0:
        return b.copy()
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return linalg.cho_solve(factor, b)


def top_eigenpair(a):
    """
    Largest eigenvalue and a unit eigenvector of a Hermitian PSD matrix.

    The eigenvector phase is fixed so that its largest-magnitude entry is
    real and positive (ties broken by the lowest index). A zero matrix
    returns ``(0.0, e_1)``.

    Parameters
    ----------
    a : (n, n) complex array

    Returns
    -------
    lam : float
    v : (n,) complex array, ``||v|| = 1``
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 0.0, np.zeros(0, dtype=complex)
    if not np.any(a):
        v = np.zeros(n, dtype=complex)
        v[0] = 1.0
        return 0.0, v
    a = 0.5 * (a + a.conj().T)
    w, vecs = np.linalg.eigh(a)
    lam = max(float(w[-1]), 0.0)
    v = vecs[:, -1]
    mags = np.abs(v)
    # first index within rounding of the max magnitude, so the convention
    # does not flip between numerically equal entries
    idx = int(np.argmax(mags >= mags.max() * (1 - 1e-12)))
    v = v * (abs(v[idx]) / v[idx])
    return lam, v / np.linalg.norm(v)


def backward_identity(n):
    """The ``n``-by-``n`` exchange matrix (ones on the anti-diagonal)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return np.eye(n)[::-1].copy()
