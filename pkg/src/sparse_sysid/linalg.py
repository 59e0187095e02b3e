"""Small dense symmetric eigenproblems via cyclic Jacobi rotations.

The identification loop asks for the smallest eigenvalue of the information
matrix after every sample, so the kernel is compiled with numba when it is
available. Matrices here are small (a few hundred rows at most), which is the
regime where Jacobi is accurate and competitive.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidArgument, NumericFailure

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50
SYMMETRY_TOL = 1e-9


@njit(cache=True)
def _cyclic_jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = math.sqrt(scale)

    sweeps = 0
    while True:
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off) <= tol * scale:
            return a, v, sweeps, True
        if sweeps == max_sweeps:
            return a, v, sweeps, False
        sweeps += 1

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("matrix has non-finite entries")
    if a.size:
        scale = max(1.0, float(np.max(np.abs(a))))
        if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * scale:
            raise InvalidArgument("matrix is not symmetric")
    return a


def jacobi_eigh(
    a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Args:
        a: Symmetric matrix. Asymmetry above ``1e-9`` (relative to the largest
            entry, floored at 1) is rejected.
        tol: Sweeps stop once the off-diagonal Frobenius norm drops below
            ``tol * ||a||_F``.
        max_sweeps: Maximum number of full cyclic sweeps.

    Returns:
        ``(w, v)`` with eigenvalues ``w`` in ascending order and the matching
        unit eigenvectors in the columns of ``v``.

    Raises:
        InvalidArgument: ``a`` is not square, finite and symmetric.
        NumericFailure: the sweep budget was exhausted.
    """
    a = _check_symmetric(a)
    if a.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))
    a = 0.5 * (a + a.T)
    d, v, sweeps, ok = _cyclic_jacobi(a, float(tol), int(max_sweeps))
    if not ok:
        raise NumericFailure(f"Jacobi did not converge in {sweeps} sweeps")
    w = np.diag(d).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def min_eigenvalue(f: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    w, _ = jacobi_eigh(f)
    return float(w[0])


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values in descending order, from Jacobi on ``m.T @ m``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    w, _ = jacobi_eigh(gram)
    return np.sqrt(np.clip(w[::-1], 0.0, None))


def spectral_norm(m: np.ndarray) -> float:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    return float(singular_values(m)[0])
