"""Small dense linear-algebra helpers shared across the package."""

import numpy as np
import numpy.linalg as la


def vec(M):
    """Stack the columns of M into a vector (column-major)."""
    return np.asarray(M).reshape(-1, order="F")


def unvec(v):
    """Inverse of ``vec`` for square matrices."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def symmetrize(M):
    """Return (M + M.T) / 2."""
    M = np.asarray(M)
    return 0.5 * (M + M.T)


def specrad(M):
    """Spectral radius (largest eigenvalue magnitude) of a square matrix."""
    return float(np.max(np.abs(la.eigvals(M))))


def frobenius(A, B):
    """Frobenius inner product <A, B> = trace(A.T @ B)."""
    return float(np.tensordot(A, B, axes=2))


def min_eigval(M):
    """Smallest eigenvalue of the symmetric part of M."""
    return float(la.eigvalsh(symmetrize(M))[0])


def is_positive_definite(M, tol=1e-12):
    """Smallest eigenvalue strictly above an absolute floor."""
    return min_eigval(M) > tol


def is_positive_semidefinite(M, tol=1e-10):
    """Smallest eigenvalue above a floor scaled to the matrix size."""
    M = np.asarray(M)
    return min_eigval(M) >= -tol * (1.0 + la.norm(M))


def psd_factor(M):
    """A factor G with G @ G.T == M for symmetric PSD M.

    Eigenvalues below zero are clipped, so a slightly indefinite input
    (roundoff) yields the factor of its PSD projection.
    """
    w, V = la.eigh(symmetrize(M))
    return V * np.sqrt(np.clip(w, 0.0, None))


def solve_linear_extended(A, b):
    """Solve A x = b by Gaussian elimination in extended precision.

    Inputs are promoted to ``np.longdouble`` (80-bit on x86; identical to
    float64 on platforms without extended precision) and eliminated with
    partial pivoting.  Intended for small dense systems where forward error
    at the float64 scale matters; returns the longdouble solution.
    """
    A = np.array(A, dtype=np.longdouble)
    x = np.array(b, dtype=np.longdouble)
    n = A.shape[0]
    for k in range(n - 1):
        pivot = k + int(np.argmax(np.abs(A[k:, k])))
        if pivot != k:
            A[[k, pivot]] = A[[pivot, k]]
            x[[k, pivot]] = x[[pivot, k]]
        if A[k, k] == 0.0:
            raise la.LinAlgError("matrix is singular")
        mult = A[k + 1 :, k] / A[k, k]
        A[k + 1 :, k + 1 :] -= mult[:, None] * A[k, k + 1 :]
        x[k + 1 :] -= mult * x[k]
    if A[n - 1, n - 1] == 0.0:
        raise la.LinAlgError("matrix is singular")
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1 :] @ x[k + 1 :]) / A[k, k]
    return x
