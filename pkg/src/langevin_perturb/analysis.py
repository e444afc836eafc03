"""Exact asymptotic-variance analysis for Gaussian targets.

For the linear dynamics with drift matrix B and quadratic observable
f(q) = q.Kq + l.q + c, the Poisson equation reduces to a pair of finite
linear problems in the 2d-dimensional phase space (A = B^T):

    A C + C A^T = Kbar,      A D = lbar,

and the asymptotic variance of the time-average estimator is

    sigma^2_f = 2 Tr(C Kbar) + D.lbar            (unit stationary covariance).

General SPD precision S is handled by the change of variables
q -> S^{1/2} q, p -> S^{-1/2} p, which maps the dynamics onto the unit form
provided M = S, Gamma = gamma*S and J2 = S J1 S; both perturbations then act
through the single antisymmetric matrix Jt = S^{1/2} J1 S^{1/2}.

A note on the constant-term consistency check: expanding -L g for
g = x.Cx + D.x gives the constant 2 Tr(QC) = 2 gamma Tr_p C, which must equal
Tr Kbar.  (The factor 2 is occasionally dropped in print; the C(0) solution
itself forces it.)  Every Lyapunov solve asserts this identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import matkit

PAPER_COND_TOL = 1e-12
TRACE_COND_TOL = 1e-8


@dataclass(frozen=True)
class PerturbationConfig:
    """All sampler parameters: strengths (mu, nu, gamma) and matrices.

    S is the target precision, M the mass, Gamma the friction, J1/J2 the
    antisymmetric drift perturbations acting on positions and momenta.
    """

    mu: float
    nu: float
    gamma: float
    S: np.ndarray
    M: np.ndarray
    Gamma: np.ndarray
    J1: np.ndarray
    J2: np.ndarray

    def __post_init__(self):
        s = matkit.check_symmetric(self.S, "S")
        m = matkit.check_symmetric(self.M, "M")
        g = matkit.check_symmetric(self.Gamma, "Gamma")
        j1 = matkit.check_antisymmetric(self.J1, "J1")
        j2 = matkit.check_antisymmetric(self.J2, "J2")
        d = s.shape[0]
        for name, x in (("M", m), ("Gamma", g), ("J1", j1), ("J2", j2)):
            if x.shape != (d, d):
                raise ValueError(f"{name} has shape {x.shape}, expected {(d, d)}")
        if self.gamma <= 0:
            raise ValueError("friction scalar gamma must be positive")
        for name, x in (("S", s), ("M", m), ("Gamma", g), ("J1", j1), ("J2", j2)):
            object.__setattr__(self, name, x)

    @property
    def d(self) -> int:
        return self.S.shape[0]

    @classmethod
    def unit(cls, d: int, mu: float, nu: float, gamma: float, J=None) -> "PerturbationConfig":
        """Unit-covariance configuration: S=M=I, Gamma=gamma*I, J1=J2=J."""
        eye = np.eye(d)
        j = np.zeros((d, d)) if J is None else matkit.check_antisymmetric(J, "J")
        return cls(mu=mu, nu=nu, gamma=gamma, S=eye, M=eye, Gamma=gamma * eye, J1=j, J2=j.copy())

    @classmethod
    def paper(cls, S, mu: float, gamma: float, J1=None, nu: float | None = None) -> "PerturbationConfig":
        """Preconditioned configuration M=S, Gamma=gamma*S, J2=S J1 S (nu defaults to mu)."""
        s = matkit.check_symmetric(S, "S")
        d = s.shape[0]
        j1 = np.zeros((d, d)) if J1 is None else matkit.check_antisymmetric(J1, "J1")
        return cls(
            mu=mu,
            nu=mu if nu is None else nu,
            gamma=gamma,
            S=s,
            M=s.copy(),
            Gamma=gamma * s,
            J1=j1,
            J2=s @ j1 @ s,
        )

    def has_paper_structure(self, tol: float = PAPER_COND_TOL) -> bool:
        """M = S, Gamma = gamma*S and J2 = S J1 S, up to relative tolerance."""
        scale = max(matkit.max_abs(self.S), 1e-300)
        ok_m = matkit.max_abs(self.M - self.S) <= tol * scale
        ok_g = matkit.max_abs(self.Gamma - self.gamma * self.S) <= tol * self.gamma * scale
        j2 = self.S @ self.J1 @ self.S
        ok_j = matkit.max_abs(self.J2 - j2) <= tol * max(matkit.max_abs(j2), 1e-300) + tol
        return bool(ok_m and ok_g and ok_j)

    def satisfies_paper_conditions(self, tol: float = PAPER_COND_TOL) -> bool:
        """Full recommended conditions, including mu = nu."""
        return self.has_paper_structure(tol) and abs(self.mu - self.nu) <= tol * (1 + abs(self.mu))

    def drift_matrix(self) -> np.ndarray:
        """2d x 2d drift B of dX = -BX dt + sqrt(2Q) dW in original coordinates."""
        minv = np.linalg.inv(self.M)
        return np.block(
            [
                [self.mu * self.J1 @ self.S, -minv],
                [self.S, (self.Gamma + self.nu * self.J2) @ minv],
            ]
        )


@dataclass(frozen=True)
class QuadraticObservable:
    """f(q) = q.Kq + l.q + c.  The constant c never affects sigma^2."""

    K: np.ndarray
    l: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        k = matkit.check_symmetric(self.K, "K")
        lv = np.asarray(self.l, dtype=float)
        if lv.ndim != 1 or lv.shape[0] != k.shape[0]:
            raise ValueError("l must be a vector of length matching K")
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "l", lv)

    @property
    def d(self) -> int:
        return self.K.shape[0]

    @classmethod
    def quadratic(cls, K, c: float = 0.0) -> "QuadraticObservable":
        k = matkit.check_symmetric(K, "K")
        return cls(K=k, l=np.zeros(k.shape[0]), c=c)

    @classmethod
    def linear(cls, l) -> "QuadraticObservable":
        lv = np.asarray(l, dtype=float)
        return cls(K=np.zeros((lv.size, lv.size)), l=lv, c=0.0)

    @classmethod
    def named(cls, name: str, d: int) -> "QuadraticObservable":
        if name == "sum":
            return cls.linear(np.ones(d))
        if name == "norm2":
            return cls.quadratic(np.eye(d))
        raise ValueError(f"unknown observable name {name!r} (expected 'sum' or 'norm2')")

    def centered(self, S=None) -> "QuadraticObservable":
        """Shift c so that the observable has zero mean under N(0, S^{-1})."""
        if S is None:
            c = -float(np.trace(self.K))
        else:
            c = -float(np.trace(np.linalg.solve(S, self.K)))
        return replace(self, c=c)

    def evaluate(self, q):
        q = np.asarray(q, dtype=float)
        return np.sum((q @ self.K) * q, axis=-1) + q @ self.l + self.c


@dataclass(frozen=True)
class ThetaDerivatives:
    """Gradient and Hessian of Theta(mu, nu) = sigma^2_f at the origin."""

    gradient: np.ndarray
    hessian: np.ndarray


def _unit_perturbation(cfg: PerturbationConfig) -> np.ndarray:
    """Antisymmetric Jt = S^{1/2} J1 S^{1/2} through which both perturbations act."""
    if not cfg.has_paper_structure():
        raise ValueError(
            "analysis requires the preconditioned structure M=S, Gamma=gamma*S, J2=S J1 S"
        )
    d = cfg.d
    if matkit.max_abs(cfg.S - np.eye(d)) <= PAPER_COND_TOL:
        return cfg.J1.copy()
    sh, _ = matkit.spd_roots(cfg.S)
    jt = sh @ cfg.J1 @ sh
    return (jt - jt.T) / 2


def _unit_reduction(cfg: PerturbationConfig, f: QuadraticObservable):
    """Map (cfg, f) to the unit-covariance system (gamma, Jt, Kt, lt)."""
    if f.d != cfg.d:
        raise ValueError("observable dimension does not match config")
    jt = _unit_perturbation(cfg)
    d = cfg.d
    if matkit.max_abs(cfg.S - np.eye(d)) <= PAPER_COND_TOL:
        return cfg.gamma, jt, f.K.copy(), f.l.copy()
    _, shi = matkit.spd_roots(cfg.S)
    kt = shi @ f.K @ shi
    kt = (kt + kt.T) / 2
    return cfg.gamma, jt, kt, shi @ f.l


def a_matrix(cfg: PerturbationConfig) -> np.ndarray:
    """Unit-form phase-space matrix A = [[-mu*Jt, I], [-I, gamma*I - nu*Jt]]."""
    jt = _unit_perturbation(cfg)
    d = cfg.d
    eye = np.eye(d)
    return np.block([[-cfg.mu * jt, eye], [-eye, cfg.gamma * eye - cfg.nu * jt]])


def _solve_poisson_blocks(a: np.ndarray, K: np.ndarray, l: np.ndarray):
    """Solve AC + CA^T = Kbar and AD = lbar; return (C, D, Kbar, lbar)."""
    d = K.shape[0]
    kbar = np.zeros((2 * d, 2 * d))
    kbar[:d, :d] = K
    lbar = np.zeros(2 * d)
    lbar[:d] = l
    c = matkit.solve_lyapunov(a, kbar)
    dvec = matkit.solve_linear(a, lbar) if np.any(l) else np.zeros(2 * d)
    return c, dvec, kbar, lbar


def _assert_trace_condition(gamma: float, c: np.ndarray, kbar: np.ndarray):
    d = c.shape[0] // 2
    tr_p = float(np.trace(c[d:, d:]))
    tr_k = float(np.trace(kbar))
    if abs(2.0 * gamma * tr_p - tr_k) > TRACE_COND_TOL * (1.0 + abs(tr_k)):
        raise matkit.DegenerateDriftError(
            f"trace condition violated: 2*gamma*Tr_p C = {2 * gamma * tr_p!r} vs Tr Kbar = {tr_k!r}"
        )


def asym_variance(cfg: PerturbationConfig, f: QuadraticObservable) -> float:
    """sigma^2_f via the Lyapunov route, in unit coordinates."""
    gamma, jt, kt, lt = _unit_reduction(cfg, f)
    d = cfg.d
    eye = np.eye(d)
    a = np.block([[-cfg.mu * jt, eye], [-eye, gamma * eye - cfg.nu * jt]])
    c, dvec, kbar, lbar = _solve_poisson_blocks(a, kt, lt)
    _assert_trace_condition(gamma, c, kbar)
    sigma2 = 2.0 * float(np.trace(c @ kbar)) + float(dvec @ lbar)
    if sigma2 < -1e-10 * (1.0 + abs(sigma2)):
        raise matkit.DegenerateDriftError(f"negative asymptotic variance {sigma2!r}")
    return sigma2


def asym_variance_general(cfg: PerturbationConfig, f: QuadraticObservable) -> float:
    """sigma^2_f computed in original coordinates via the 2d x 2d general drift.

    Independent cross-check of the unit-coordinate route: the Poisson blocks
    use A = B^T of the untransformed dynamics and the stationary covariance
    Sigma_inf = blockdiag(S^{-1}, M) enters the pairing explicitly.
    """
    if f.d != cfg.d:
        raise ValueError("observable dimension does not match config")
    d = cfg.d
    a = cfg.drift_matrix().T
    c, dvec, kbar, lbar = _solve_poisson_blocks(a, f.K, f.l)
    sigma_inf = np.zeros((2 * d, 2 * d))
    sigma_inf[:d, :d] = np.linalg.inv(cfg.S)
    sigma_inf[d:, d:] = cfg.M
    # constant-term consistency: 2 Tr(Q C) = Tr(Kbar Sigma_inf), Q = blkdiag(0, Gamma)
    lhs = 2.0 * float(np.trace(cfg.Gamma @ c[d:, d:]))
    rhs = float(np.trace(kbar @ sigma_inf))
    if abs(lhs - rhs) > TRACE_COND_TOL * (1.0 + abs(rhs)):
        raise matkit.DegenerateDriftError(
            f"trace condition violated in original coordinates: {lhs!r} vs {rhs!r}"
        )
    return 2.0 * float(np.trace(c @ sigma_inf @ kbar @ sigma_inf)) + float(
        dvec @ sigma_inf @ lbar
    )


def resolve_nu(rule, mu: float) -> float:
    """nu-rules: 'equal', 'opposed', ('scaled', r), ('fixed', nu)."""
    if rule == "equal":
        return mu
    if rule == "opposed":
        return -mu
    if isinstance(rule, tuple) and len(rule) == 2:
        kind, val = rule
        if kind == "scaled":
            return float(val) * mu
        if kind == "fixed":
            return float(val)
    raise ValueError(f"unknown nu-rule {rule!r}")


def theta_surface(cfg: PerturbationConfig, f: QuadraticObservable, mu_grid, nu_rule="equal"):
    """Evaluate (mu, nu, sigma^2) over a grid of perturbation strengths."""
    out = []
    for mu in np.asarray(mu_grid, dtype=float):
        nu = resolve_nu(nu_rule, float(mu))
        cfg_mu = replace(cfg, mu=float(mu), nu=nu)
        out.append((float(mu), nu, asym_variance(cfg_mu, f)))
    return out


def theta_hessian_quadratic(gamma: float, K, J) -> ThetaDerivatives:
    """Closed-form derivatives of Theta at the origin for f(q) = q.Kq + c.

    The gradient vanishes identically; the Hessian is a combination of the
    two trace invariants T1 = Tr(JKJK) and T2 = Tr(J^2 K^2).
    """
    k = matkit.check_symmetric(K, "K")
    j = matkit.check_antisymmetric(J, "J")
    g = float(gamma)
    t1 = float(np.trace(j @ k @ j @ k))
    t2 = float(np.trace(j @ j @ k @ k))
    h_mm = -(g + g**-3 + g**3) * (t1 - t2) - (2.0 / g) * t1
    h_mn = (g**-3 + 1.0 / g - g) * t2 + (-(g**-3) + 1.0 / g + g) * t1
    h_nn = (g**-3 - 1.0 / g) * t2 - (g**-3 + 1.0 / g) * t1
    return ThetaDerivatives(
        gradient=np.zeros(2), hessian=np.array([[h_mm, h_mn], [h_mn, h_nn]])
    )


def theta_hessian_linear(gamma: float, l, J) -> ThetaDerivatives:
    """Closed-form derivatives of Theta at the origin for f(q) = l.q + c."""
    j = matkit.check_antisymmetric(J, "J")
    lv = np.asarray(l, dtype=float)
    g = float(gamma)
    jl2 = float(np.dot(j @ lv, j @ lv))
    h = np.array([[-2.0 * g**3 * jl2, 2.0 * g * jl2], [2.0 * g * jl2, 0.0]])
    return ThetaDerivatives(gradient=np.zeros(2), hessian=h)


def theta_linear_closed(gamma: float, mu: float, nu: float, l, J) -> float:
    """Theta for a linear observable: l . (-mu*J + (gamma*I - nu*J)^{-1})^{-1} l.

    This is lbar . A^{-1} lbar evaluated through the Schur top-left block of
    A^{-1}; note the outer inverse (at mu=nu=0 the value is gamma*|l|^2).
    """
    j = matkit.check_antisymmetric(J, "J")
    lv = np.asarray(l, dtype=float)
    d = lv.size
    eye = np.eye(d)
    tl = matkit.schur_block_tl_inverse(-mu * j, eye, -eye, gamma * eye - nu * j)
    return float(lv @ tl @ lv)


def limiting_variance_optimal(gamma: float, S, K) -> float:
    """min over admissible J of lim_{mu->inf} sigma^2: the trace-part variance.

    Equals sigma^2 of f1(q) = q.K1 q at mu=nu=0 under the preconditioned
    structure, where K1 = (Tr(S^{-1}K)/d) * S.
    """
    s = matkit.check_symmetric(S, "S")
    k = matkit.check_symmetric(K, "K")
    d = s.shape[0]
    k1 = (float(np.trace(np.linalg.solve(s, k))) / d) * s
    cfg = PerturbationConfig.paper(s, mu=0.0, gamma=gamma)
    return asym_variance(cfg, QuadraticObservable.quadratic(k1))


def invariance_commuting_check(gamma: float, K, l, J, mu_grid) -> float:
    """max_mu |sigma^2(mu) - sigma^2(0)| for [J,K] = 0 and l in ker J.

    Raises if the commutation hypothesis is violated beyond 1e-12 relative.
    """
    k = matkit.check_symmetric(K, "K")
    j = matkit.check_antisymmetric(J, "J")
    lv = np.asarray(l, dtype=float)
    scale = max(matkit.max_abs(j) * matkit.max_abs(k), 1e-300)
    if matkit.max_abs(j @ k - k @ j) > 1e-12 * scale:
        raise ValueError("hypothesis violated: [J, K] != 0")
    if matkit.max_abs(j @ lv) > 1e-12 * max(matkit.max_abs(lv), 1e-300):
        raise ValueError("hypothesis violated: l not in ker J")
    d = k.shape[0]
    f = QuadraticObservable(K=k, l=lv)
    base = asym_variance(PerturbationConfig.unit(d, 0.0, 0.0, gamma, j), f)
    dev = 0.0
    for mu in np.asarray(mu_grid, dtype=float):
        s2 = asym_variance(PerturbationConfig.unit(d, float(mu), float(mu), gamma, j), f)
        dev = max(dev, abs(s2 - base))
    return dev


def basic_inequalities(gamma: float, K, J) -> tuple[float, float]:
    """(gamma - 4/gamma^3 - gamma^3 - 1/gamma,  Tr(JKJK) - Tr(J^2K^2)).

    The first is negative for every gamma > 0; the second is nonnegative and
    vanishes exactly when [J, K] = 0.
    """
    k = matkit.check_symmetric(K, "K")
    j = matkit.check_antisymmetric(J, "J")
    g = float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    first = g - 4.0 / g**3 - g**3 - 1.0 / g
    second = float(np.trace(j @ k @ j @ k) - np.trace(j @ j @ k @ k))
    return first, second


# Finite-difference oracles for the Theta derivatives (documented step sizes:
# 1e-5 for gradients, 1e-3 for Hessians, both central).

def theta_grad_fd(gamma: float, K, l, J, h: float = 1e-5) -> np.ndarray:
    d = np.asarray(K).shape[0]
    f = QuadraticObservable(K=np.asarray(K, dtype=float), l=np.asarray(l, dtype=float))

    def theta(mu, nu):
        return asym_variance(PerturbationConfig.unit(d, mu, nu, gamma, J), f)

    return np.array(
        [
            (theta(h, 0.0) - theta(-h, 0.0)) / (2 * h),
            (theta(0.0, h) - theta(0.0, -h)) / (2 * h),
        ]
    )


def theta_hessian_fd(gamma: float, K, l, J, h: float = 1e-3) -> np.ndarray:
    d = np.asarray(K).shape[0]
    f = QuadraticObservable(K=np.asarray(K, dtype=float), l=np.asarray(l, dtype=float))

    def theta(mu, nu):
        return asym_variance(PerturbationConfig.unit(d, mu, nu, gamma, J), f)

    t0 = theta(0.0, 0.0)
    h_mm = (theta(h, 0.0) - 2 * t0 + theta(-h, 0.0)) / h**2
    h_nn = (theta(0.0, h) - 2 * t0 + theta(0.0, -h)) / h**2
    h_mn = (theta(h, h) - theta(h, -h) - theta(-h, h) + theta(-h, -h)) / (4 * h**2)
    return np.array([[h_mm, h_mn], [h_mn, h_nn]])
