"""Dense linear-algebra kernels for small matrices (d <= 128).

Everything operates on plain float64 ndarrays and is a pure function of its
inputs, so all routines are safe to call concurrently.  Structural inputs
(symmetric / antisymmetric matrices) are validated against a relative
tolerance of 1e-12 and rejected rather than repaired: a violation almost
always means the caller constructed the matrix incorrectly.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

SYM_TOL = 1e-12


class DegenerateDriftError(np.linalg.LinAlgError):
    """Lyapunov system is singular: A has eigenvalues summing to zero."""


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_square(x, name: str = "matrix") -> np.ndarray:
    a = as_matrix(x, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def max_abs(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.abs(x).max()) if x.size else 0.0


def check_symmetric(x, name: str = "matrix", tol: float = SYM_TOL) -> np.ndarray:
    """Return x as an ndarray after verifying ||X - X^T||_inf <= tol*||X||_inf."""
    a = as_square(x, name)
    if max_abs(a - a.T) > tol * max(max_abs(a), 1e-300):
        raise ValueError(f"{name} is not symmetric within tolerance {tol}")
    return a


def check_antisymmetric(x, name: str = "matrix", tol: float = SYM_TOL) -> np.ndarray:
    """Verify ||X + X^T||_inf <= tol*||X||_inf and a vanishing diagonal."""
    a = as_square(x, name)
    scale = max(max_abs(a), 1e-300)
    if max_abs(a + a.T) > tol * scale or max_abs(np.diag(a)) > tol * scale:
        raise ValueError(f"{name} is not antisymmetric within tolerance {tol}")
    return a


def sym_eig(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition S = U diag(w) U^T of a symmetric matrix.

    Returns eigenvalues ascending and the orthogonal U whose columns are the
    eigenvectors (LAPACK symmetric-QR via numpy).
    """
    a = check_symmetric(s, "sym_eig input")
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(f"symmetric eigensolver failed: {exc}") from exc
    return w, u


def spd_sqrt(s) -> np.ndarray:
    """Symmetric positive definite square root, via sym_eig."""
    w, u = sym_eig(s)
    if w.min() <= 0:
        raise ValueError(f"spd_sqrt: matrix not positive definite (lambda_min={w.min()})")
    r = (u * np.sqrt(w)) @ u.T
    return (r + r.T) / 2


def spd_roots(s) -> tuple[np.ndarray, np.ndarray]:
    """(S^{1/2}, S^{-1/2}) for SPD S, from a single eigendecomposition."""
    w, u = sym_eig(s)
    if w.min() <= 0:
        raise ValueError(f"spd_roots: matrix not positive definite (lambda_min={w.min()})")
    sq = (u * np.sqrt(w)) @ u.T
    isq = (u / np.sqrt(w)) @ u.T
    return (sq + sq.T) / 2, (isq + isq.T) / 2


def expm(x) -> np.ndarray:
    """Matrix exponential (scipy's scaling-and-squaring Pade approximant)."""
    return scipy.linalg.expm(as_square(x, "expm input"))


def solve_lyapunov(a, rhs) -> np.ndarray:
    """Solve A C + C A^T = RHS by Kronecker vectorization.

    O(n^6) in the worst case, which is fine at the analysis sizes used here
    (2d <= 64, occasionally 128) and keeps the solver exact and dependency-free.
    RHS must be symmetric; the solution is then symmetric by uniqueness.
    """
    a = as_square(a, "A")
    rhs = check_symmetric(rhs, "RHS")
    n = a.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"shape mismatch: A is {a.shape}, RHS is {rhs.shape}")
    eye = np.eye(n)
    big = np.kron(eye, a) + np.kron(a, eye)  # vec(AC + CA^T), column-major vec
    try:
        c = np.linalg.solve(big, rhs.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise DegenerateDriftError(
            "degenerate drift: Lyapunov operator is singular "
            "(two eigenvalues of A sum to zero)"
        ) from exc
    c = c.reshape((n, n), order="F")
    c = (c + c.T) / 2
    resid = max_abs(a @ c + c @ a.T - rhs)
    if resid > 1e-9 * max(max_abs(rhs), 1e-300):
        raise DegenerateDriftError(
            f"degenerate drift: Lyapunov residual {resid:.3e} exceeds tolerance"
        )
    return c


def solve_linear(a, b) -> np.ndarray:
    """Solve A x = b with a residual guarantee ||Ax-b||_inf <= 1e-10 ||b||_inf."""
    a = as_square(a, "A")
    b = np.asarray(b, dtype=float)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular linear system: {exc}") from exc
    resid = max_abs(a @ x - b)
    if resid > 1e-10 * max(max_abs(b), 1e-300):
        # one step of iterative refinement before giving up
        x = x + np.linalg.solve(a, b - a @ x)
        resid = max_abs(a @ x - b)
        if resid > 1e-10 * max(max_abs(b), 1e-300):
            raise np.linalg.LinAlgError(
                f"linear solve residual {resid:.3e} exceeds tolerance (ill-conditioned A)"
            )
    return x


def schur_block_tl_inverse(u, v, w, x) -> np.ndarray:
    """Top-left block of [[U,V],[W,X]]^{-1}, i.e. (U - V X^{-1} W)^{-1}.

    Requires X and the Schur complement U - V X^{-1} W to be invertible.
    """
    u = as_square(u, "U")
    v = as_matrix(v, "V")
    w = as_matrix(w, "W")
    x = as_square(x, "X")
    try:
        xinv_w = np.linalg.solve(x, w)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("X block is singular") from exc
    schur = u - v @ xinv_w
    try:
        return np.linalg.inv(schur)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Schur complement U - V X^{-1} W is singular") from exc


def eig_general(b) -> np.ndarray:
    """Eigenvalues of a general square matrix (LAPACK Hessenberg/QR).

    Returned sorted lexicographically by (real, imaginary); conjugates come
    in pairs for real input.  Non-convergence raises instead of returning NaN.
    """
    b = as_square(b, "eig_general input")
    try:
        ev = np.linalg.eigvals(b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue iteration did not converge: {exc}") from exc
    if not np.all(np.isfinite(ev.view(float))):
        raise np.linalg.LinAlgError("eigenvalue computation produced non-finite values")
    return sort_complex(ev)


def sort_complex(values) -> np.ndarray:
    """Sort complex values by (real, imag) for multiset comparisons."""
    v = np.asarray(values, dtype=complex)
    order = np.lexsort((v.imag, v.real))
    return v[order]
