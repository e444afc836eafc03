"""Time integration of the perturbed underdamped dynamics.

State arrays have shape (d,) for a single trajectory or (R, d) for a batch of
R independent replicas; every step function accepts both.  Matrices act on the
last axis (x @ M.T), so a batch step is identical to R stacked single steps.

Randomness flows through a stream object exposing ``normal(shape)``.
``RngStream`` wraps numpy's counter-based Philox generator (identical seed =>
identical normal sequence on a given build).  ``MultiStream`` carries one
Philox stream per replica and serves stacked draws whose row i reproduces
exactly what replica i's own stream would have produced, so a batch run is
byte-identical to the corresponding single-trajectory runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import matkit
from .analysis import PerturbationConfig
from .targets import GaussianTarget, PotentialTarget


class NumericalDivergenceError(RuntimeError):
    """Trajectory produced non-finite state."""


class PhaseState(NamedTuple):
    q: np.ndarray
    p: np.ndarray


class RngStream:
    """Counter-based normal-variate stream (numpy Philox) with a fixed seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def normal(self, shape) -> np.ndarray:
        return self._gen.normal(size=shape)


class MultiStream:
    """One stream per replica; draws of shape (R, w) stack the per-replica draws.

    Draws are prefetched in blocks of ``block`` steps per stream.  numpy fills
    arrays in C order from the sequential variate stream, so row i's sequence
    equals what RngStream(seeds[i]) would produce draw by draw; a test pins
    this equivalence.
    """

    def __init__(self, seeds, block: int = 256):
        self.streams = [RngStream(s) for s in seeds]
        self.block = int(block)
        self._buffer = None
        self._pos = 0
        self._width = None

    def normal(self, shape) -> np.ndarray:
        r, w = shape
        if r != len(self.streams):
            raise ValueError(f"expected {len(self.streams)} rows, got {r}")
        if self._width is None:
            self._width = w
        elif w != self._width:
            raise ValueError("MultiStream draws must keep a constant width")
        if self._buffer is None or self._pos >= self._buffer.shape[0]:
            self._buffer = np.stack(
                [s.normal((self.block, w)) for s in self.streams], axis=1
            )
            self._pos = 0
        out = self._buffer[self._pos]
        self._pos += 1
        return out


class _InjectedNoise:
    """Deterministic stand-in for a stream: returns a fixed vector once."""

    def __init__(self, vec):
        self.vec = np.asarray(vec, dtype=float)

    def normal(self, shape) -> np.ndarray:
        out = np.asarray(self.vec, dtype=float).reshape(shape)
        return out


def _as_stream(rng):
    return RngStream(rng) if isinstance(rng, (int, np.integer)) else rng


def _project_psd_factor(x, name: str) -> np.ndarray:
    """Symmetrize and factor a covariance: L with L L^T = X, clipping rounding
    negatives at zero (anything below -1e-13*||X|| is an error)."""
    x = (x + x.T) / 2
    w, u = np.linalg.eigh(x)
    floor = -1e-13 * max(matkit.max_abs(x), 1e-300)
    if w.min() < floor:
        raise ValueError(f"{name} is not positive semidefinite (lambda_min={w.min()})")
    return u * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class OuStepCache:
    """Exact Ornstein-Uhlenbeck momentum update for time step dt:

        p' = E p + L xi,  E = exp(-dt (Gamma + nu J2) M^{-1}),  L L^T = M - E M E^T.

    The noise covariance M - E M E^T is the exact transition covariance of the
    momentum OU part (stationary covariance M); it reduces to the textbook
    (1 - e^{-2 gamma dt}) I when M = I, Gamma = gamma I and nu = 0.
    """

    E: np.ndarray
    L: np.ndarray


def make_ou_cache(cfg: PerturbationConfig, dt: float) -> OuStepCache:
    minv = np.linalg.inv(cfg.M)
    e = matkit.expm(-dt * (cfg.Gamma + cfg.nu * cfg.J2) @ minv)
    cov = cfg.M - e @ cfg.M @ e.T
    return OuStepCache(E=e, L=_project_psd_factor(cov, "OU noise covariance"))


@dataclass(frozen=True)
class OuExactCache:
    """Exact phase-space transition for a Gaussian target:

        X' = e^{-B dt} X + xi,  Cov xi = Sigma_inf - e^{-B dt} Sigma_inf e^{-B^T dt},

    with Sigma_inf = blockdiag(S^{-1}, M).  Construction verifies the
    stationarity identity B Sigma_inf + Sigma_inf B^T = 2 Q to 1e-10.
    """

    T: np.ndarray
    L: np.ndarray
    sigma_inf: np.ndarray


def make_ou_exact_cache(cfg: PerturbationConfig, dt: float) -> OuExactCache:
    d = cfg.d
    b = cfg.drift_matrix()
    sigma_inf = np.zeros((2 * d, 2 * d))
    sigma_inf[:d, :d] = np.linalg.inv(cfg.S)
    sigma_inf[d:, d:] = cfg.M
    two_q = np.zeros((2 * d, 2 * d))
    two_q[d:, d:] = 2.0 * cfg.Gamma
    resid = matkit.max_abs(b @ sigma_inf + sigma_inf @ b.T - two_q)
    if resid > 1e-10 * max(matkit.max_abs(two_q), 1e-300):
        raise ValueError(f"stationarity identity violated (residual {resid:.3e})")
    t = matkit.expm(-dt * b)
    cov = sigma_inf - t @ sigma_inf @ t.T
    return OuExactCache(T=t, L=_project_psd_factor(cov, "OU transition covariance"), sigma_inf=sigma_inf)


def rk4_flow(q, h: float, target: PotentialTarget, J, substeps: int = 1) -> np.ndarray:
    """Classical RK4 for the conservative rotation qdot = -J grad V(q) over time h."""
    if h <= 0:
        raise ValueError("step size must be positive")
    q = np.asarray(q, dtype=float)
    j = np.asarray(J, dtype=float)
    if not np.any(j):
        return q.copy()
    jt = j.T

    def force(x):
        g = -(target.grad(x) @ jt)
        if not np.all(np.isfinite(g)):
            raise NumericalDivergenceError("non-finite force in RK4 flow")
        return g

    hs = h / substeps
    for _ in range(substeps):
        k1 = force(q)
        k2 = force(q + 0.5 * hs * k1)
        k3 = force(q + 0.5 * hs * k2)
        k4 = force(q + hs * k3)
        q = q + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return q


def ou_step(p, cache: OuStepCache, rng) -> np.ndarray:
    """Exact momentum OU update p' = E p + L xi."""
    p = np.asarray(p, dtype=float)
    xi = _as_stream(rng).normal(p.shape)
    return p @ cache.E.T + xi @ cache.L.T


def baoab_step(
    state: PhaseState,
    dt: float,
    cfg: PerturbationConfig,
    target: PotentialTarget,
    rng,
    cache: OuStepCache | None = None,
) -> PhaseState:
    """Unperturbed BAOAB: B(dt/2) A(dt/2) O(dt) A(dt/2) B(dt/2)."""
    if cache is None:
        cache = make_ou_cache(cfg, dt)
    minv_t = np.linalg.inv(cfg.M).T
    q, p = np.asarray(state.q, dtype=float), np.asarray(state.p, dtype=float)
    h = dt / 2.0
    p = p - h * target.grad(q)
    q = q + h * (p @ minv_t)
    p = ou_step(p, cache, rng)
    q = q + h * (p @ minv_t)
    p = p - h * target.grad(q)
    return PhaseState(q, p)


def perturbed_baoab_step(
    state: PhaseState,
    dt: float,
    cfg: PerturbationConfig,
    target: PotentialTarget,
    rng,
    cache: OuStepCache | None = None,
    rk_substeps: int = 1,
) -> PhaseState:
    """Seven-stage perturbed scheme: B A RK4(dt/2) O RK4(dt/2) A B.

    The RK4 stages integrate qdot = -mu J1 grad V over dt/2 each; the O stage
    carries the nu J2 perturbation inside its exact exponential.  At
    mu = nu = 0 every extra stage is the identity and the update is bitwise
    identical to baoab_step on the same stream.
    """
    if cache is None:
        cache = make_ou_cache(cfg, dt)
    minv_t = np.linalg.inv(cfg.M).T
    q, p = np.asarray(state.q, dtype=float), np.asarray(state.p, dtype=float)
    h = dt / 2.0
    j_eff = cfg.mu * cfg.J1
    p = p - h * target.grad(q)
    q = q + h * (p @ minv_t)
    if cfg.mu != 0.0:
        q = rk4_flow(q, h, target, j_eff, rk_substeps)
    p = ou_step(p, cache, rng)
    if cfg.mu != 0.0:
        q = rk4_flow(q, h, target, j_eff, rk_substeps)
    q = q + h * (p @ minv_t)
    p = p - h * target.grad(q)
    return PhaseState(q, p)


def ou_exact_step(
    state: PhaseState,
    dt: float,
    cfg: PerturbationConfig,
    target: PotentialTarget,
    rng,
    cache: OuExactCache | None = None,
) -> PhaseState:
    """Exact-in-distribution phase-space update, Gaussian targets only."""
    if not isinstance(target, GaussianTarget):
        raise ValueError("exact OU integration requires a Gaussian target")
    if matkit.max_abs(target.S - cfg.S) > 1e-12 * max(matkit.max_abs(cfg.S), 1e-300):
        raise ValueError("target precision does not match the configuration")
    if cache is None:
        cache = make_ou_exact_cache(cfg, dt)
    q, p = np.asarray(state.q, dtype=float), np.asarray(state.p, dtype=float)
    x = np.concatenate([q, p], axis=-1)
    xi = _as_stream(rng).normal(x.shape)
    x = x @ cache.T.T + xi @ cache.L.T
    d = cfg.d
    return PhaseState(x[..., :d], x[..., d:])


INTEGRATORS = ("baoab", "perturbed-baoab", "exact-ou")


@dataclass
class SimulationResult:
    """Streaming time-average estimate over the post-burn-in window."""

    mean: np.ndarray | float
    n_samples: int
    state: PhaseState


def simulate(
    cfg: PerturbationConfig,
    target: PotentialTarget,
    f: Callable[[np.ndarray], np.ndarray],
    dt: float,
    T: float,
    T0: float = 0.0,
    q0=None,
    p0=None,
    rng=0,
    integrator: str = "perturbed-baoab",
    rk_substeps: int = 1,
) -> SimulationResult:
    """Time-average pi_hat(f) = (T-T0)^{-1} int_{T0}^{T} f(q_t) dt.

    Left-endpoint Riemann accumulation over the post-burn-in steps; memory
    stays O(1) in trajectory length.  q0 defaults to (1,...,1) and p0 to 0.
    A non-finite state aborts with the offending step index.
    """
    if dt <= 0 or not T > T0 >= 0:
        raise ValueError("need dt > 0 and T > T0 >= 0")
    n_steps = int(round(T / dt))
    n_burn = int(round(T0 / dt))
    if n_steps <= n_burn:
        raise ValueError("no post-burn-in steps: decrease T0 or dt")
    d = cfg.d
    q = np.ones(d) if q0 is None else np.array(q0, dtype=float)
    p = np.zeros_like(q) if p0 is None else np.array(p0, dtype=float)
    stream = _as_stream(rng)

    if integrator == "exact-ou":
        cache = make_ou_exact_cache(cfg, dt)
        step = lambda s: ou_exact_step(s, dt, cfg, target, stream, cache)
    elif integrator == "baoab":
        cache = make_ou_cache(cfg, dt)
        step = lambda s: baoab_step(s, dt, cfg, target, stream, cache)
    elif integrator == "perturbed-baoab":
        cache = make_ou_cache(cfg, dt)
        step = lambda s: perturbed_baoab_step(s, dt, cfg, target, stream, cache, rk_substeps)
    else:
        raise ValueError(f"unknown integrator {integrator!r} (expected one of {INTEGRATORS})")

    acc = 0.0
    count = 0
    state = PhaseState(q, p)
    for n in range(n_steps):
        if n >= n_burn:
            acc = acc + f(state.q)
            count += 1
        state = step(state)
        if not np.all(np.isfinite(state.q)):
            raise NumericalDivergenceError(f"non-finite state at step {n + 1}")
    return SimulationResult(mean=acc / count, n_samples=count, state=state)


@dataclass
class OverdampedPairResult:
    q_eps: np.ndarray
    q_limit: np.ndarray
    sup_error: float


def overdamped_pair(
    cfg: PerturbationConfig,
    target: PotentialTarget,
    eps: float,
    T: float,
    dt: float,
    rng=0,
) -> OverdampedPairResult:
    """Couple the mass-rescaled dynamics to its overdamped limit.

    Both SDEs are driven by the same Wiener increments (Euler-Maruyama at the
    same dt).  The rescaled system is

        dq = (1/eps) M^{-1} p dt - mu J1 grad V dt,
        dp = -(1/eps) grad V dt - (1/eps^2)(nu J2 + Gamma) M^{-1} p dt
             + (1/eps) sqrt(2 Gamma) dW,

    and the limit is dq = -((nu J2 + Gamma)^{-1} + mu J1) grad V dt
    + (nu J2 + Gamma)^{-1} sqrt(2 Gamma) dW.  Returns both position paths and
    sup_t |q^eps_t - q^0_t|.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    stream = _as_stream(rng)
    d = cfg.d
    n_steps = int(round(T / dt))
    minv = np.linalg.inv(cfg.M)
    fmat = cfg.nu * cfg.J2 + cfg.Gamma
    finv = np.linalg.inv(fmat)
    sqrt_2gamma = matkit.spd_sqrt(2.0 * cfg.Gamma)
    stiff = (fmat @ minv).T / eps**2
    noise_eps = sqrt_2gamma.T / eps
    noise_lim = (finv @ sqrt_2gamma).T
    drift_lim = (finv + cfg.mu * cfg.J1).T

    q = np.ones(d)
    p = np.zeros(d)
    q_lim = q.copy()
    path_eps = np.empty((n_steps + 1, d))
    path_lim = np.empty((n_steps + 1, d))
    path_eps[0] = q
    path_lim[0] = q_lim
    sup_err = 0.0
    sqdt = np.sqrt(dt)
    for n in range(n_steps):
        dw = sqdt * stream.normal((d,))
        g = target.grad(q)
        q = q + dt * ((p @ minv.T) / eps - cfg.mu * (g @ cfg.J1.T))
        p = p + dt * (-g / eps - p @ stiff) + dw @ noise_eps
        g0 = target.grad(q_lim)
        q_lim = q_lim + dt * (-(g0 @ drift_lim)) + dw @ noise_lim
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(q_lim))):
            raise NumericalDivergenceError(f"non-finite state at step {n + 1}")
        path_eps[n + 1] = q
        path_lim[n + 1] = q_lim
        sup_err = max(sup_err, float(np.abs(q - q_lim).max()))
    return OverdampedPairResult(q_eps=path_eps, q_limit=path_lim, sup_error=sup_err)


def affine_step_map(
    cfg: PerturbationConfig,
    target: GaussianTarget,
    dt: float,
    integrator: str = "perturbed-baoab",
) -> tuple[np.ndarray, np.ndarray]:
    """Extract (T, R) with X' = T X + R xi for one step on a Gaussian target.

    Probes the actual integrator with injected basis states and noise (every
    stage is affine when grad V is linear).  The stationary covariance of the
    chain then solves the discrete Lyapunov equation S = T S T^T + R R^T,
    which gives the exact sampling bias of the scheme without Monte Carlo.
    """
    d = cfg.d
    if integrator == "exact-ou":
        cache = make_ou_exact_cache(cfg, dt)
        step = lambda s, r: ou_exact_step(s, dt, cfg, target, r, cache)
        noise_dim = 2 * d
    elif integrator == "baoab":
        cache = make_ou_cache(cfg, dt)
        step = lambda s, r: baoab_step(s, dt, cfg, target, r, cache)
        noise_dim = d
    elif integrator == "perturbed-baoab":
        cache = make_ou_cache(cfg, dt)
        step = lambda s, r: perturbed_baoab_step(s, dt, cfg, target, r, cache)
        noise_dim = d
    else:
        raise ValueError(f"unknown integrator {integrator!r}")

    def run(x, xi):
        st = step(PhaseState(x[:d].copy(), x[d:].copy()), _InjectedNoise(xi))
        return np.concatenate([st.q, st.p])

    tmat = np.empty((2 * d, 2 * d))
    zero_noise = np.zeros(noise_dim)
    for i in range(2 * d):
        e = np.zeros(2 * d)
        e[i] = 1.0
        tmat[:, i] = run(e, zero_noise)
    rmat = np.empty((2 * d, noise_dim))
    zero_state = np.zeros(2 * d)
    for j in range(noise_dim):
        e = np.zeros(noise_dim)
        e[j] = 1.0
        rmat[:, j] = run(zero_state, e)
    return tmat, rmat


def stationary_covariance_of_map(tmat: np.ndarray, rmat: np.ndarray) -> np.ndarray:
    """Solve S = T S T^T + R R^T by vectorization (exact chain covariance)."""
    n = tmat.shape[0]
    rhs = (rmat @ rmat.T).flatten(order="F")
    big = np.eye(n * n) - np.kron(tmat, tmat)
    s = np.linalg.solve(big, rhs).reshape((n, n), order="F")
    return (s + s.T) / 2
