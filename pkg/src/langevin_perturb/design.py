"""Constructive optimal antisymmetric perturbations for quadratic observables.

The construction makes the traceless part K0 of the observable matrix a
commutator: find orthogonal U with zero diagonal for U K0 U^T, pick distinct
reals a_i, set Jbar_ij = (U K0 U^T)_ij / (a_i - a_j), and pull back.  The
certificate [A_sym, J] = K0 with A_sym = U^T diag(a) U witnesses that the
observable's traceless part is annihilated in the large-perturbation limit.

The returned J is gauge-fixed to ||J||_F = ||K0||_F (mu carries the strength);
the a-vector is rescaled inversely so the certificate stays exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import matkit


@dataclass(frozen=True)
class DesignResult:
    """Optimal perturbation pair with its commutator certificate.

    j_tilde is the design in unit-covariance coordinates; j1/j2 are the
    pulled-back perturbations (equal to j_tilde when S = I).  The certificate
    [a_sym, j_tilde] = K0 holds for the traceless part K0 of the transformed
    observable matrix, with a_sym = U^T diag(a) U.
    """

    j1: np.ndarray
    j2: np.ndarray
    j_tilde: np.ndarray
    u: np.ndarray
    a: np.ndarray
    a_sym: np.ndarray
    k0: np.ndarray


def zero_diagonal_transform(k0, tol: float = 1e-12) -> np.ndarray:
    """Orthogonal U such that U K0 U^T has zeros on the diagonal (K0 traceless).

    Diagonalize, then sweep: for each nonzero diagonal entry rotate in the
    (i, j)-plane against an opposite-sign partner with angle
    alpha = arctan sqrt(-d_i/d_j).  The partner is the opposite-sign entry of
    largest magnitude (ties to the lowest index), which keeps the angle small.
    Entries below tol*||K0|| count as already zero.
    """
    k0 = matkit.check_symmetric(k0, "K0")
    d = k0.shape[0]
    scale = matkit.max_abs(k0)
    if scale == 0.0:
        return np.eye(d)
    if abs(np.trace(k0)) > 1e-10 * scale:
        raise ValueError("zero_diagonal_transform requires a traceless matrix")
    _, v = matkit.sym_eig(k0)
    u = v.T  # U K0 U^T = diag(eigenvalues)
    m = u @ k0 @ u.T
    for i in range(d):
        di = m[i, i]
        if abs(di) <= tol * scale:
            continue
        candidates = [j for j in range(i + 1, d) if m[j, j] * di < 0]
        if not candidates:
            raise ValueError("no opposite-sign partner found; trace drifted from zero")
        j = max(candidates, key=lambda jj: (abs(m[jj, jj]), -jj))
        alpha = np.arctan(np.sqrt(-di / m[j, j]))
        rot = np.eye(d)
        c, s = np.cos(alpha), np.sin(alpha)
        rot[i, i] = c
        rot[i, j] = -s
        rot[j, i] = s
        rot[j, j] = c
        m = rot @ m @ rot.T
        u = rot @ u
    return u


def optimal_j_unit(K) -> DesignResult:
    """Optimal antisymmetric perturbation for f(q) = q.Kq at unit covariance."""
    k = matkit.check_symmetric(K, "K")
    d = k.shape[0]
    k0 = k - (np.trace(k) / d) * np.eye(d)
    if matkit.max_abs(k0) <= 1e-14 * max(matkit.max_abs(k), 1e-300):
        # pure trace part: no reduction is possible, J = 0
        zero = np.zeros((d, d))
        return DesignResult(
            j1=zero, j2=zero.copy(), j_tilde=zero.copy(), u=np.eye(d),
            a=np.arange(1.0, d + 1), a_sym=np.diag(np.arange(1.0, d + 1)),
            k0=np.zeros((d, d)),
        )
    u = zero_diagonal_transform(k0)
    a = np.arange(1.0, d + 1)
    m = u @ k0 @ u.T
    denom = a[:, None] - a[None, :]
    np.fill_diagonal(denom, 1.0)
    jbar = m / denom
    np.fill_diagonal(jbar, 0.0)
    j = u.T @ jbar @ u
    j = (j - j.T) / 2
    # Frobenius gauge: scale J to ||K0||_F, rescale a inversely so that
    # [U^T diag(a) U, J] = K0 remains exact.
    s = np.linalg.norm(k0) / np.linalg.norm(j)
    j = s * j
    a = a / s
    a_sym = u.T @ np.diag(a) @ u
    return DesignResult(j1=j, j2=j.copy(), j_tilde=j.copy(), u=u, a=a, a_sym=a_sym, k0=k0)


def optimal_j_general(K, S) -> DesignResult:
    """Optimal (J1, J2) for f(q) = q.Kq under precision S: design in unit
    coordinates on Kt = S^{-1/2} K S^{-1/2}, then pull back via S^{+-1/2}."""
    k = matkit.check_symmetric(K, "K")
    s = matkit.check_symmetric(S, "S")
    sh, shi = matkit.spd_roots(s)
    kt = shi @ k @ shi
    unit = optimal_j_unit((kt + kt.T) / 2)
    j1 = shi @ unit.j_tilde @ shi
    j2 = sh @ unit.j_tilde @ sh
    j1 = (j1 - j1.T) / 2
    j2 = (j2 - j2.T) / 2
    return DesignResult(
        j1=j1, j2=j2, j_tilde=unit.j_tilde, u=unit.u, a=unit.a,
        a_sym=unit.a_sym, k0=unit.k0,
    )


def commutator_residual(result: DesignResult) -> float:
    """||[A_sym, Jt] - K0||_inf, the certificate defect (0 for valid designs)."""
    return matkit.max_abs(
        result.a_sym @ result.j_tilde - result.j_tilde @ result.a_sym - result.k0
    )


@dataclass(frozen=True)
class RationalIndependenceReport:
    """Positive eigenfrequencies of J and any near-integer relations found."""

    lambdas: np.ndarray
    relations: list = field(default_factory=list)
    kmax: int = 5

    @property
    def independent(self) -> bool:
        return not self.relations


def rational_independence_report(J, kmax: int = 5, rel_tol: float = 1e-8) -> RationalIndependenceReport:
    """Scan sum_i k_i lambda_i over |k_i| <= kmax for near-zero combinations.

    lambda_i are the positive imaginary parts of sigma(J); a relation within
    rel_tol * max(lambda) is reported (the zero-variance limit for
    antisymmetric observables needs rationally independent frequencies).
    Purely diagnostic: the input is never modified.
    """
    j = matkit.check_antisymmetric(J, "J")
    ev = matkit.eig_general(j)
    lam = np.sort(ev.imag[ev.imag > 1e-12 * max(matkit.max_abs(j), 1e-300)])
    m = lam.size
    if m == 0:
        return RationalIndependenceReport(lambdas=lam, relations=[], kmax=kmax)
    if (2 * kmax + 1) ** m > 2_000_000:
        raise ValueError(
            f"relation scan too large: (2*{kmax}+1)^{m} combinations; reduce kmax"
        )
    tol = rel_tol * lam.max()
    relations = []
    for combo in itertools.product(range(-kmax, kmax + 1), repeat=m):
        if all(c == 0 for c in combo):
            continue
        first = next(c for c in combo if c != 0)
        if first < 0:  # report each relation once, up to overall sign
            continue
        if abs(float(np.dot(combo, lam))) <= tol:
            relations.append(tuple(combo))
    return RationalIndependenceReport(lambdas=lam, relations=relations, kmax=kmax)
