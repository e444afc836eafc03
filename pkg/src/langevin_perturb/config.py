"""Flat key=value experiment configuration with [section] headers.

Matrices are written as semicolon-separated rows of comma-separated numbers
("2,0;0,1"), vectors as comma-separated numbers.  The format is deliberately
dependency-free and diff-friendly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_sections(text: str) -> dict[str, dict[str, str]]:
    """Parse '[section]' headers and 'key = value' lines; '#' starts a comment."""
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, value = line.split("=", 1)
        sections[current][key.strip().lower()] = value.strip()
    return sections


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}") from exc


def parse_matrix(text: str) -> np.ndarray:
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
    except ValueError as exc:
        raise ConfigError(f"bad matrix {text!r}") from exc
    m = np.array(rows, dtype=float)
    if m.ndim != 2 or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged matrix {text!r}")
    return m


def format_matrix(m: np.ndarray) -> str:
    return ";".join(",".join(repr(float(x)) for x in row) for row in np.asarray(m))


def parse_nu_rule(text: str):
    t = text.strip().lower()
    if t in ("equal", "opposed"):
        return t
    if t.startswith("scaled:"):
        return ("scaled", float(t.split(":", 1)[1]))
    if t.startswith("fixed:"):
        return ("fixed", float(t.split(":", 1)[1]))
    raise ConfigError(f"unknown nu_rule {text!r} (equal|opposed|scaled:R|fixed:V)")


@dataclass
class ExperimentConfig:
    """Typed view of an experiment configuration file."""

    target_kind: str = "gaussian"
    d: int = 2
    beta: float = 1.0
    S: np.ndarray | None = None  # gaussian precision; None means identity

    observable_name: str | None = "norm2"
    K: np.ndarray | None = None
    l: np.ndarray | None = None

    integrator: str = "perturbed-baoab"
    dt: float = 1e-3
    T: float = 10.0
    T0: float = 1.0
    n_reps: int = 50
    seed: int = 1234
    q0: np.ndarray | None = None  # None means (1, ..., 1)
    workers: int = 1

    gammas: list = field(default_factory=lambda: [1.0])
    mus: list = field(default_factory=lambda: [0.0])
    nu_rule: object = "equal"
    j_rule: str = "design"  # design | none | explicit matrix via J1 key
    J1: np.ndarray | None = None

    eps_list: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    m_max: int = 2

    csv_path: str | None = None
    svg_path: str | None = None

    def validate(self):
        if self.n_reps < 1:
            raise ConfigError("n_reps must be >= 1")
        if not self.gammas or not self.mus:
            raise ConfigError("gamma and mu lists must be nonempty")
        if not self.dt < self.T:
            raise ConfigError("need dt < T")
        if self.target_kind not in ("gaussian", "bridge"):
            raise ConfigError(f"unknown target kind {self.target_kind!r}")
        if self.j_rule not in ("design", "none", "matrix"):
            raise ConfigError(f"unknown j_rule {self.j_rule!r}")
        if self.j_rule == "matrix" and self.J1 is None:
            raise ConfigError("j_rule = matrix requires a J1 entry")
        return self

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        sec = parse_sections(text)
        cfg = cls()
        tgt = sec.get("target", {})
        cfg.target_kind = tgt.get("kind", cfg.target_kind).lower()
        cfg.d = int(tgt.get("d", cfg.d))
        cfg.beta = float(tgt.get("beta", cfg.beta))
        if "s" in tgt and tgt["s"].lower() != "identity":
            cfg.S = parse_matrix(tgt["s"])
            cfg.d = cfg.S.shape[0]

        obs = sec.get("observable", {})
        if "name" in obs:
            cfg.observable_name = obs["name"].lower()
        if "k" in obs:
            cfg.K = parse_matrix(obs["k"])
            cfg.observable_name = None
        if "l" in obs:
            cfg.l = parse_vector(obs["l"])
            cfg.observable_name = None

        smp = sec.get("sampler", {})
        cfg.integrator = smp.get("integrator", cfg.integrator).lower()
        cfg.dt = float(smp.get("dt", cfg.dt))
        cfg.T = float(smp.get("t", cfg.T))
        cfg.T0 = float(smp.get("t0", cfg.T0))
        cfg.n_reps = int(smp.get("n_reps", cfg.n_reps))
        cfg.seed = int(smp.get("seed", cfg.seed))
        cfg.workers = int(smp.get("workers", cfg.workers))
        if "q0" in smp and smp["q0"].lower() != "ones":
            cfg.q0 = parse_vector(smp["q0"])

        swp = sec.get("sweep", {})
        if "gammas" in swp:
            cfg.gammas = [float(x) for x in swp["gammas"].split(",")]
        if "mus" in swp:
            cfg.mus = [float(x) for x in swp["mus"].split(",")]
        if "nu_rule" in swp:
            cfg.nu_rule = parse_nu_rule(swp["nu_rule"])
        if "j_rule" in swp:
            jr = swp["j_rule"].lower()
            cfg.j_rule = "matrix" if jr.startswith("matrix") else jr
        if "j1" in swp:
            cfg.J1 = parse_matrix(swp["j1"])
            cfg.j_rule = "matrix"
        if "eps_list" in swp:
            cfg.eps_list = [float(x) for x in swp["eps_list"].split(",")]
        if "m_max" in swp:
            cfg.m_max = int(swp["m_max"])

        out = sec.get("output", {})
        cfg.csv_path = out.get("csv")
        cfg.svg_path = out.get("svg")
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_text(fh.read())


def bridge_preset(paper_scale: bool = False) -> ExperimentConfig:
    """Desk-scale diffusion-bridge experiment; --paper-scale restores the
    original stepsize/horizon/replication settings (not part of acceptance)."""
    cfg = ExperimentConfig(
        target_kind="bridge",
        d=15,
        beta=1.0,
        observable_name="norm2",
        integrator="perturbed-baoab",
        dt=1e-3,
        T=10.0,
        T0=1.0,
        n_reps=50,
        seed=1234,
        gammas=[0.01, 0.1, 1.0],
        mus=[0.0, 1.0, 5.0],
        nu_rule="equal",
        j_rule="design",
    )
    if paper_scale:
        cfg.dt = 1e-4
        cfg.T = 100.0
        cfg.n_reps = 500
    return cfg.validate()
