"""Potential-energy targets: Gaussian and the discretized diffusion bridge.

A target exposes the dimension ``d``, the potential ``value(q)`` and its
gradient ``grad(q)``.  Both accept a single configuration of shape (d,) or a
batch of shape (R, d); ``value`` then returns a scalar or an (R,) array and
``grad`` preserves the input shape.  Targets are immutable after construction,
so concurrent evaluation is safe.
"""

from __future__ import annotations

import numpy as np

from . import matkit


class PotentialTarget:
    """Interface: a potential V on R^d with analytic gradient."""

    d: int

    def value(self, q):
        raise NotImplementedError

    def grad(self, q):
        raise NotImplementedError


class GaussianTarget(PotentialTarget):
    """V(q) = q.Sq/2 for an SPD precision matrix S (covariance S^{-1})."""

    def __init__(self, precision):
        s = matkit.check_symmetric(precision, "precision")
        w, _ = matkit.sym_eig(s)
        if w.min() <= 0:
            raise ValueError("Gaussian precision must be positive definite")
        self.S = s
        self.d = s.shape[0]

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * np.sum((q @ self.S) * q, axis=-1)

    def grad(self, q):
        q = np.asarray(q, dtype=float)
        return q @ self.S  # S symmetric


class DoubleWell:
    """The fixed well U(x) = (x^2-1)^2 / 2 with its first three derivatives."""

    def u(self, x):
        return 0.5 * (x * x - 1.0) ** 2

    def du(self, x):
        return 2.0 * x * (x * x - 1.0)

    def d2u(self, x):
        return 2.0 * (3.0 * x * x - 1.0)

    def d3u(self, x):
        return 12.0 * x


class BridgeTarget(PotentialTarget):
    """Discretized double-well diffusion bridge on [0,1] with Dirichlet ends.

    The path x(0)=x(1)=0 is represented by its d interior grid values with
    spacing delta = 1/(d+1).  The potential is

        V(x) = Psi_tilde(x) - (beta*delta/4) x.Ax,

    where A = delta^{-2} tridiag(1,-2,1) is the discrete Dirichlet Laplacian
    (negative definite) and

        Psi_tilde(x) = (beta/2) delta sum_i ( U'(x_i)^2 - U''(x_i)/beta ).

    The Gaussian part of V therefore has SPD precision S = -(beta*delta/2) A;
    the sign flip relative to writing S = (beta/2) delta A is deliberate, since
    the mass/friction preconditioning M = S, Gamma = gamma*S needs S to be SPD.
    """

    def __init__(self, d: int, beta: float, well: DoubleWell | None = None):
        if d < 1:
            raise ValueError("grid size d must be >= 1")
        if beta <= 0:
            raise ValueError("inverse temperature beta must be positive")
        self.d = int(d)
        self.beta = float(beta)
        self.delta = 1.0 / (d + 1)
        self.well = well if well is not None else DoubleWell()
        a = np.zeros((d, d))
        idx = np.arange(d)
        a[idx, idx] = -2.0
        a[idx[:-1], idx[:-1] + 1] = 1.0
        a[idx[:-1] + 1, idx[:-1]] = 1.0
        self.A = a / self.delta**2
        self._S = -(self.beta * self.delta / 2.0) * self.A

    def psi_tilde(self, x):
        x = np.asarray(x, dtype=float)
        w, beta = self.well, self.beta
        g = w.du(x) ** 2 - w.d2u(x) / beta
        return (beta / 2.0) * self.delta * np.sum(g, axis=-1)

    def grad_psi_tilde(self, x):
        x = np.asarray(x, dtype=float)
        w, beta = self.well, self.beta
        return (beta / 2.0) * self.delta * (2.0 * w.du(x) * w.d2u(x) - w.d3u(x) / beta)

    def value(self, q):
        q = np.asarray(q, dtype=float)
        quad = 0.5 * np.sum((q @ self._S) * q, axis=-1)
        return self.psi_tilde(q) + quad

    def grad(self, q):
        q = np.asarray(q, dtype=float)
        return self.grad_psi_tilde(q) + q @ self._S

    def precision(self) -> np.ndarray:
        """SPD precision S = -(beta*delta/2) A of the Gaussian part."""
        return self._S.copy()


def bridge_build(d: int, beta: float, well: DoubleWell | None = None) -> BridgeTarget:
    return BridgeTarget(d, beta, well)


def bridge_precision(target: BridgeTarget) -> np.ndarray:
    return target.precision()


def psi_tilde(target: BridgeTarget, x) -> float:
    return target.psi_tilde(x)


def finite_difference_grad(target: PotentialTarget, q, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of target.value, the oracle for grad()."""
    q = np.asarray(q, dtype=float)
    g = np.zeros_like(q)
    for i in range(q.shape[-1]):
        e = np.zeros_like(q)
        e[..., i] = h
        g[..., i] = (target.value(q + e) - target.value(q - e)) / (2 * h)
    return g
