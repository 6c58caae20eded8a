"""Independent oracle for the drift-interval Hamiltonian.

H(p) is the principal eigenvalue of the tilted forward operator
    f -> -(Gamma f)' + M * int f - f + p v f
on [-1, 1] with zero flux at the ends. The operator is discretised with
first-order upwind finite volumes on a uniform grid (a different grid and
formulation from the characteristic quadrature in the library), its
Perron eigenvalue is found with a shift-invert Arnoldi solve, and two
resolutions are combined by Richardson extrapolation.

Run: python3 hamiltonian_oracle.py
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def principal(p, n, gamma=lambda v: 0.2 * (1 - v * v), density=lambda v: 0.5 + 0 * v):
    h = 2.0 / n
    centers = -1 + h * (np.arange(n) + 0.5)
    faces = -1 + h * np.arange(1, n)
    speed = gamma(faces)
    rows, cols, vals = [], [], []
    for k, s in enumerate(speed):
        up = k if s > 0 else k + 1
        # flux s * f_up leaves cell k and enters cell k+1
        rows += [k, k + 1]
        cols += [up, up]
        vals += [-s / h, s / h]
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a = a + sp.diags(p * centers - 1.0)
    dense_jump = np.outer(density(centers), np.full(n, h))
    op = a.toarray() + dense_jump
    ev = np.linalg.eigvals(op)
    return float(np.max(ev.real))


def oracle(p, n=1600):
    coarse, fine = principal(p, n), principal(p, 2 * n)
    return 2 * fine - coarse, abs(fine - coarse)


if __name__ == "__main__":
    for p in (-1.0, -0.5, 0.25, 0.5, 1.0):
        value, spread = oracle(p)
        print(f"p={p:+.2f}  H={value:.10f}  (coarse-fine gap {spread:.1e})")
