"""Dense linear algebra helpers: validated matmul and a symmetric
generalized eigensolver (Cholesky reduction + cyclic Jacobi).

Everything works on plain float64 numpy arrays. Matrices are 2-D,
vectors are 1-D; all public operations reject non-finite output.
"""

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import solve_triangular

from .errors import DimensionError, SingularScatterError

SYMMETRY_TOL = 1e-9


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise DimensionError(f"{name} must be a 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def matmul(a, b):
    """Matrix product with explicit shape validation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix product overflowed to non-finite values")
    return out


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns,
    unordered. Deterministic: fixed sweep order, no pivot search.
    """
    a = np.array(as_matrix(a, "a"), copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def solve_generalized_symmetric_eig(sb, sw, ridge=0.0):
    """Eigenpairs of (sw + ridge*I)^(-1) sb for symmetric sb, sw.

    Reduces to a standard symmetric problem through the Cholesky factor of
    the regularized within matrix, then runs cyclic Jacobi. Eigenvalues come
    back non-increasing; eigenvectors are columns, unit Euclidean norm. Ties
    are broken by the ascending index of the underlying Jacobi column.
    """
    sb = as_matrix(sb, "sb")
    sw = as_matrix(sw, "sw")
    if sb.shape[0] != sb.shape[1] or sb.shape != sw.shape:
        raise DimensionError(
            f"sb and sw must be square and equal-sized, got {sb.shape} and {sw.shape}"
        )
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    scale_b = max(np.linalg.norm(sb), 1.0)
    scale_w = max(np.linalg.norm(sw), 1.0)
    if np.linalg.norm(sb - sb.T) > SYMMETRY_TOL * scale_b:
        raise ValueError("sb is not symmetric")
    if np.linalg.norm(sw - sw.T) > SYMMETRY_TOL * scale_w:
        raise ValueError("sw is not symmetric")

    n = sb.shape[0]
    reg = sw + ridge * np.eye(n)
    try:
        chol = np.linalg.cholesky(reg)
    except LinAlgError:
        raise SingularScatterError(
            "within-class scatter plus ridge is not positive definite; "
            "increase the ridge term"
        ) from None

    # C = L^-1 sb L^-T is symmetric with the same eigenvalues.
    half = solve_triangular(chol, sb, lower=True)
    c = solve_triangular(chol, half.T, lower=True).T
    c = 0.5 * (c + c.T)
    vals, vecs = jacobi_eigh(c)

    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = solve_triangular(chol.T, vecs[:, order], lower=False)
    norms = np.linalg.norm(vecs, axis=0)
    norms[norms == 0] = 1.0
    vecs = vecs / norms
    return vals, vecs
