"""Spectral diagnostics: drift eigenvalues, generator spectrum, decay rates.

Spectra are reported in the sigma(-L) convention (positive real parts), so the
spectral bound is simply the smallest nonzero real part.  The generator
spectrum of the linear dynamics consists of all multi-index sums of drift
eigenvalues; truncating at Hermite level m_max enumerates sums of at most
m_max drift eigenvalues with repetition.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import matkit
from .analysis import PerturbationConfig


@dataclass(frozen=True)
class SpectrumSet:
    """Complex eigenvalue multiset with its provenance tag."""

    values: np.ndarray
    multiplicities: np.ndarray
    source: str

    def __post_init__(self):
        v = matkit.sort_complex(self.values)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "multiplicities", np.asarray(self.multiplicities, dtype=int))

    def expanded(self) -> np.ndarray:
        """Values repeated by multiplicity, sorted."""
        return matkit.sort_complex(np.repeat(self.values, self.multiplicities))


def _dedup(values, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    vals = matkit.sort_complex(values)
    out, mult = [], []
    for v in vals:
        if out and abs(v - out[-1]) <= tol:
            mult[-1] += 1
        else:
            out.append(v)
            mult.append(1)
    return np.array(out, dtype=complex), np.array(mult, dtype=int)


def drift_spectrum(cfg: PerturbationConfig) -> SpectrumSet:
    """Eigenvalues of the 2d x 2d drift matrix B (numeric)."""
    ev = matkit.eig_general(cfg.drift_matrix())
    return SpectrumSet(values=ev, multiplicities=np.ones(ev.size, dtype=int), source="drift")


def drift_spectrum_closed(mu: float, gamma: float, j_imag) -> SpectrumSet:
    """Closed-form sigma(B) for equal perturbations mu = nu:

        { i*mu*beta + gamma/2 +- sqrt((gamma/2)^2 - 1) : i*beta in sigma(J) },

    one pair per eigenvalue of J (j_imag lists the d signed imaginary parts).
    """
    betas = np.asarray(j_imag, dtype=float)
    disc = np.lib.scimath.sqrt((gamma / 2.0) ** 2 - 1.0)
    vals = np.concatenate(
        [1j * mu * betas + gamma / 2.0 + disc, 1j * mu * betas + gamma / 2.0 - disc]
    )
    return SpectrumSet(
        values=vals, multiplicities=np.ones(vals.size, dtype=int), source="drift-closed"
    )


def generator_level_spectrum(cfg: PerturbationConfig, m: int) -> SpectrumSet:
    """Spectrum on the Hermite level-m subspace: sums of exactly m drift
    eigenvalues with repetition, deduplicated at 1e-10 with multiplicities."""
    if m < 1:
        raise ValueError("Hermite level m must be >= 1")
    base = drift_spectrum(cfg).values
    n = base.size
    if comb(n + m - 1, m) > 100_000:
        raise ValueError(f"level-{m} enumeration too large ({comb(n + m - 1, m)} terms)")
    sums = [base[list(combo)].sum() for combo in combinations_with_replacement(range(n), m)]
    vals, mult = _dedup(np.array(sums, dtype=complex))
    return SpectrumSet(values=vals, multiplicities=mult, source=f"generator-level({m})")


def generator_spectrum(cfg: PerturbationConfig, m_max: int) -> SpectrumSet:
    """Multi-index sums of drift eigenvalues for Hermite levels 1..m_max.

    Enumerates { sum_j alpha_j lambda_j : 1 <= |alpha| <= m_max } over the
    2d drift eigenvalues, deduplicated at 1e-10 with multiplicities.
    """
    if not 1 <= m_max <= 6:
        raise ValueError("m_max must be between 1 and 6 (combinatorial guard)")
    n = 2 * cfg.d
    total = sum(comb(n + m - 1, m) for m in range(1, m_max + 1))
    if total > 100_000:
        raise ValueError(f"generator spectrum enumeration too large ({total} terms)")
    sums = []
    for m in range(1, m_max + 1):
        level = generator_level_spectrum(cfg, m)
        sums.extend(np.repeat(level.values, level.multiplicities))
    vals, mult = _dedup(np.array(sums, dtype=complex))
    return SpectrumSet(values=vals, multiplicities=mult, source=f"generator-truncated({m_max})")


def spectral_bound(spec: SpectrumSet) -> float:
    """Smallest real part among eigenvalues with |lambda| > 1e-10."""
    vals = spec.values[np.abs(spec.values) > 1e-10]
    if vals.size == 0:
        raise ValueError("spectral bound undefined: all eigenvalues are zero")
    return float(vals.real.min())


def critical_damping(s: float, m: float) -> tuple[float, float]:
    """Maximal decay rate for a scalar mode with stiffness s and mass m:
    gamma_opt = 2 sqrt(s m), rate sqrt(s/m) (critically damped)."""
    if s <= 0 or m <= 0:
        raise ValueError("stiffness and mass must be positive")
    return 2.0 * float(np.sqrt(s * m)), float(np.sqrt(s / m))
