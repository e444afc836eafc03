"""Experiment driver: sweeps, replication, tables and CSV/SVG emission.

Grid points are embarrassingly parallel; rows are assembled by grid index so
output is deterministic regardless of completion order.  Replica i of every
grid point uses the stream seeded base_seed + i (common random numbers across
grid points, which sharpens perturbed-vs-unperturbed comparisons).  Emitted
CSV is byte-stable across reruns: numbers are shortest round-trip decimals,
newlines are '\\n', and per-row wallclock measurements are kept in memory but
never written.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import matkit
from .analysis import PerturbationConfig, QuadraticObservable, asym_variance, resolve_nu
from .config import ConfigError, ExperimentConfig
from .design import DesignResult, optimal_j_general
from .dynamics import MultiStream, NumericalDivergenceError, RngStream, overdamped_pair, simulate
from .spectra import generator_level_spectrum
from .targets import BridgeTarget, GaussianTarget, PotentialTarget

CSV_MARKER = "# langevin-perturb v1"


@dataclass
class SweepRow:
    gamma: float
    mu: float
    nu: float
    mean: float | None = None
    std: float | None = None
    sigma2: float | None = None
    status: str = "ok"
    wallclock: float = 0.0

    def csv_values(self):
        return (self.gamma, self.mu, self.nu, self.mean, self.std, self.sigma2, self.status)


@dataclass
class SweepTable:
    columns: tuple = ("gamma", "mu", "nu", "mean", "std", "sigma2", "status")
    rows: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path, columns, value_rows) -> None:
    lines = [CSV_MARKER, ",".join(columns)]
    for row in value_rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_MARKER:
        raise ConfigError(f"{path}: missing '{CSV_MARKER}' marker line")
    columns = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    return columns, rows


def write_svg(path, table: SweepTable, y_field: str = "std") -> None:
    """Minimal polyline chart: x = mu, one series per gamma."""
    width, height, margin = 640, 480, 60
    pts = [
        (r.mu, getattr(r, y_field), r.gamma)
        for r in table.rows
        if r.status == "ok" and getattr(r, y_field) is not None
    ]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        xspan = (x1 - x0) or 1.0
        yspan = (y1 - y0) or 1.0

        def to_px(x, y):
            px = margin + (x - x0) / xspan * (width - 2 * margin)
            py = height - margin - (y - y0) / yspan * (height - 2 * margin)
            return f"{px:.2f},{py:.2f}"

        colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
        gammas = sorted({p[2] for p in pts})
        for k, g in enumerate(gammas):
            series = sorted((p[0], p[1]) for p in pts if p[2] == g)
            poly = " ".join(to_px(x, y) for x, y in series)
            color = colors[k % len(colors)]
            parts.append(
                f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{width - margin + 4}" y="{margin + 16 * k}" font-size="12" '
                f'fill="{color}">g={_fmt(g)}</text>'
            )
        parts.append(
            f'<text x="{width / 2:.0f}" y="{height - 16}" font-size="12" text-anchor="middle">mu</text>'
        )
        parts.append(
            f'<text x="16" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 16 {height / 2:.0f})">{y_field}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(parts) + "\n")


def emit(table: SweepTable, csv_path=None, svg_path=None, y_field: str = "std") -> None:
    if csv_path:
        write_csv(csv_path, table.columns, [r.csv_values() for r in table.rows])
    if svg_path:
        write_svg(svg_path, table, y_field=y_field)


def build_target(cfg: ExperimentConfig) -> PotentialTarget:
    if cfg.target_kind == "bridge":
        return BridgeTarget(cfg.d, cfg.beta)
    s = np.eye(cfg.d) if cfg.S is None else cfg.S
    return GaussianTarget(s)


def target_precision(cfg: ExperimentConfig, target: PotentialTarget) -> np.ndarray:
    return target.precision() if isinstance(target, BridgeTarget) else target.S


def build_observable(cfg: ExperimentConfig) -> QuadraticObservable:
    if cfg.observable_name is not None:
        return QuadraticObservable.named(cfg.observable_name, cfg.d)
    k = np.zeros((cfg.d, cfg.d)) if cfg.K is None else cfg.K
    lv = np.zeros(cfg.d) if cfg.l is None else cfg.l
    return QuadraticObservable(K=k, l=lv)


def choose_j1(cfg: ExperimentConfig, s: np.ndarray, f: QuadraticObservable) -> np.ndarray:
    """Perturbation per the config's j_rule; 'design' adapts Algorithm-2 J to
    the observable's quadratic part (identity when the observable is linear)."""
    if cfg.j_rule == "none":
        return np.zeros((cfg.d, cfg.d))
    if cfg.j_rule == "matrix":
        return matkit.check_antisymmetric(cfg.J1, "J1")
    k = f.K if matkit.max_abs(f.K) > 0 else np.eye(cfg.d)
    return optimal_j_general(k, s).j1


def run_mc_sweep(cfg: ExperimentConfig) -> SweepTable:
    """Monte Carlo sweep: N independent replicas of pi_hat(f) per grid point.

    std is the sample standard deviation over replicas.  A failing grid point
    is recorded with status 'failed' and never aborts the sweep.
    """
    target = build_target(cfg)
    s = target_precision(cfg, target)
    f = build_observable(cfg)
    j1 = choose_j1(cfg, s, f)
    grid = [(g, m) for g in cfg.gammas for m in cfg.mus]
    analytic = isinstance(target, GaussianTarget)

    def one_point(point):
        gamma, mu = point
        nu = resolve_nu(cfg.nu_rule, mu)
        t0 = time.perf_counter()
        row = SweepRow(gamma=gamma, mu=mu, nu=nu)
        try:
            pcfg = PerturbationConfig.paper(s, mu=mu, gamma=gamma, J1=j1, nu=nu)
            q0 = np.ones(cfg.d) if cfg.q0 is None else cfg.q0
            q0 = np.tile(q0, (cfg.n_reps, 1))
            p0 = np.zeros_like(q0)
            stream = MultiStream([cfg.seed + i for i in range(cfg.n_reps)])
            res = simulate(
                pcfg, target, f.evaluate, cfg.dt, cfg.T, cfg.T0,
                q0=q0, p0=p0, rng=stream, integrator=cfg.integrator,
            )
            per_rep = np.atleast_1d(res.mean)
            row.mean = float(per_rep.mean())
            row.std = float(per_rep.std(ddof=1)) if per_rep.size > 1 else 0.0
            if analytic:
                row.sigma2 = asym_variance(pcfg, f)
        except (NumericalDivergenceError, np.linalg.LinAlgError, ValueError) as exc:
            row.status = f"failed: {type(exc).__name__}"
        row.wallclock = time.perf_counter() - t0
        return row

    return SweepTable(rows=_run_grid(one_point, grid, cfg.workers))


def run_analytic_sweep(cfg: ExperimentConfig) -> SweepTable:
    """Exact asymptotic variance over the (gamma, mu) grid (Gaussian targets)."""
    target = build_target(cfg)
    if not isinstance(target, GaussianTarget):
        raise ConfigError("analytic sweep requires a Gaussian target")
    s = target.S
    f = build_observable(cfg)
    j1 = choose_j1(cfg, s, f)
    grid = [(g, m) for g in cfg.gammas for m in cfg.mus]

    def one_point(point):
        gamma, mu = point
        nu = resolve_nu(cfg.nu_rule, mu)
        t0 = time.perf_counter()
        row = SweepRow(gamma=gamma, mu=mu, nu=nu)
        try:
            pcfg = PerturbationConfig.paper(s, mu=mu, gamma=gamma, J1=j1, nu=nu)
            row.sigma2 = asym_variance(pcfg, f)
        except (np.linalg.LinAlgError, ValueError) as exc:
            row.status = f"failed: {type(exc).__name__}"
        row.wallclock = time.perf_counter() - t0
        return row

    return SweepTable(rows=_run_grid(one_point, grid, cfg.workers))


def _run_grid(fn, grid, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, grid))
    return [fn(point) for point in grid]


def run_design(cfg: ExperimentConfig) -> DesignResult:
    """Algorithm-2 perturbation pair for the configured observable and target."""
    target = build_target(cfg)
    s = target_precision(cfg, target)
    f = build_observable(cfg)
    k = f.K if matkit.max_abs(f.K) > 0 else np.eye(cfg.d)
    return optimal_j_general(k, s)


def design_csv_blocks(result: DesignResult) -> str:
    """J1 and J2 as labeled CSV blocks (round-trips through parse_matrix)."""
    lines = ["# J1"]
    lines += [",".join(repr(float(x)) for x in row) for row in result.j1]
    lines.append("# J2")
    lines += [",".join(repr(float(x)) for x in row) for row in result.j2]
    return "\n".join(lines) + "\n"


def parse_design_blocks(text: str) -> tuple[np.ndarray, np.ndarray]:
    blocks: dict[str, list] = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            current = line[1:].strip()
            blocks[current] = []
        elif current is not None:
            blocks[current].append([float(x) for x in line.split(",")])
    if "J1" not in blocks or "J2" not in blocks:
        raise ConfigError("expected '# J1' and '# J2' blocks")
    return np.array(blocks["J1"]), np.array(blocks["J2"])


def run_overdamped_check(cfg: ExperimentConfig):
    """sup-error table of the coupled (rescaled, limit) pair.

    Rows are (eps, seed, sup_error); each seed drives every eps with the same
    Wiener increments.
    """
    target = build_target(cfg)
    s = target_precision(cfg, target)
    f = build_observable(cfg)
    j1 = choose_j1(cfg, s, f)
    mu = cfg.mus[0]
    gamma = cfg.gammas[0]
    pcfg = PerturbationConfig.paper(s, mu=mu, gamma=gamma, J1=j1, nu=resolve_nu(cfg.nu_rule, mu))
    rows = []
    for eps in cfg.eps_list:
        for i in range(cfg.n_reps):
            pair = overdamped_pair(pcfg, target, eps, cfg.T, cfg.dt, rng=RngStream(cfg.seed + i))
            rows.append((eps, cfg.seed + i, pair.sup_error))
    return rows


def run_spectrum(cfg: ExperimentConfig):
    """Per-level generator spectrum rows (m, re, im, multiplicity)."""
    target = build_target(cfg)
    s = target_precision(cfg, target)
    f = build_observable(cfg)
    j1 = choose_j1(cfg, s, f)
    mu = cfg.mus[0]
    gamma = cfg.gammas[0]
    pcfg = PerturbationConfig.paper(s, mu=mu, gamma=gamma, J1=j1, nu=resolve_nu(cfg.nu_rule, mu))
    out = []
    for m in range(1, cfg.m_max + 1):
        level = generator_level_spectrum(pcfg, m)
        for v, mult in zip(level.values, level.multiplicities):
            out.append((m, float(v.real), float(v.imag), int(mult)))
    return out
