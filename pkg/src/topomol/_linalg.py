"""Cyclic Jacobi eigendecomposition for small symmetric matrices."""

from __future__ import annotations

import numpy as np

from .errors import EigenNonConvergence


def jacobi_eigh(a, tol=1e-10, max_sweeps=100):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric `a`.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
    below `tol` (relative to the matrix norm), capped at `max_sweeps`.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v

    scale = np.linalg.norm(a)
    if scale == 0.0:
        return a.diagonal().copy(), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # hypot avoids overflow when the pivot is tiny relative to
                # the diagonal gap
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                a[[p, q], :] = rot @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot.T
                v[:, [p, q]] = v[:, [p, q]] @ rot.T
    else:
        raise EigenNonConvergence(
            f"Jacobi sweep cap {max_sweeps} reached (off-diagonal {off:.3e})"
        )

    w = a.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
