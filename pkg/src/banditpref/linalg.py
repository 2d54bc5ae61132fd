"""Dense symmetric eigendecomposition by cyclic Jacobi rotations."""

import numpy as np

from .errors import DomainError, NumericError

MAX_SWEEPS = 100
OFF_TOL = 1e-12


def _check_symmetric(m) -> np.ndarray:
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("expected a square matrix")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    scale = max(1.0, np.abs(m).max(initial=0.0))
    if np.abs(m - m.T).max(initial=0.0) > 1e-12 * scale:
        raise DomainError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def eigh(m, max_sweeps: int = MAX_SWEEPS, tol: float = OFF_TOL):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
    symmetric matrix.

    Cyclic-by-row Jacobi: each sweep zeroes every off-diagonal entry once;
    iteration stops when the off-diagonal Frobenius norm falls below
    ``tol * ||m||_F``.
    """
    a = _check_symmetric(m)
    k = a.shape[0]
    v = np.eye(k)
    norm = np.linalg.norm(a)
    threshold = tol * norm if norm > 0 else 0.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2)
        if off <= threshold:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2)
        if off > threshold:
            raise NumericError(f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal {off:.3e})")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def inv_sqrt_psd(m) -> np.ndarray:
    """``m^{-1/2}`` for a symmetric positive definite matrix.

    Raises DomainError when an eigenvalue is not positive; callers working
    with a singular Laplacian must add a ridge first.
    """
    w, v = eigh(m)
    if w[0] <= 0:
        raise DomainError(f"matrix is not positive definite (smallest eigenvalue {w[0]:.3e})")
    r = (v / np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)
