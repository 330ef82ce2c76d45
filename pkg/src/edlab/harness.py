"""Declarative experiments: TOML config in, CSV series and a key = value report out."""

from __future__ import annotations

import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from . import catalog
from .dynsys import ContinuousSystem, IntegratorConfig, check_reversal
from .errors import ConfigError, EdlabError
from .functionals import (
    TimeSeries,
    K_from_divergence,
    K_from_log_jacobian,
    bp_invariant,
    entropy_rates,
    l2_gap_series,
    log_density_and_entropy_series,
    log_density_series,
    ratio_invariant,
    reversibility_K_pair,
)
from .measures import AbsContinuous, Atomic, birkhoff_empirical, expect, lebesgue
from .transport import (
    QuadratureRule,
    cosine_bump,
    lagrangian_gibbs_entropies,
    pushforward_expectations,
    stationary_perturbed,
    uniform_density,
)

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "k-slope",
    "bp-invariance",
    "entropy-rate",
    "ratio-invariance",
    "reversibility",
    "weak-convergence-probe",
)
DENSITIES = ("uniform", "cosine-bump", "stationary-perturbed")
REPORT_KEYS = ("k_fit", "k_formula", "k_closed", "gap_fit_formula", "gap_fit_closed",
               "max_residual", "status")

# Pass/fail thresholds.  Every check in this module reads from here.
TOLERANCES = {
    "k_gap": 1e-6,                  # |K_fit - K_formula|, |K_fit - K_closed|
    "k_residual_atomic": 1e-8,      # linear-fit residual, point-mass nu
    "k_residual_ac": 1e-6,          # linear-fit residual, quadrature nu
    "k_residual_empirical": 5e-3,   # linear-fit residual, orbit-sampled nu
    "k_formula_ac": 1e-10,          # |K_formula| for absolutely continuous nu
    "k_fit_ac": 1e-4,               # |K_fit| for absolutely continuous nu
    "k_volume_preserving": 1e-9,    # |K_fit| for area-preserving maps
    "bp_relative": 1e-4,            # max |B_p(t) - B_p(0)| / B_p(0)
    "entropy_rate_fd": 1e-5,        # |dS/dt (central diff) - mu_t(div v)|
    "entropy_rate_limit": 1e-3,     # |-mu_t(div v) - K_plus| at t >= 15
    "entropy_constancy": 1e-9,      # |S(n) - S(0)|, |nu(log rho(n)) - nu(log rho(0))|
    "ratio_constancy": 1e-8,        # max deviation of nu(f(rho1/rho2))
    "reversal_residual": 1e-8,      # |R T_t x - T_{-t} R x|
    "weak_limit": 2e-3,             # |mu_n(y) - y_SRB| at the final horizon
    "weak_vs_empirical": 3e-3,      # |mu_n(f) - empirical SRB mean of f|
}

ENTROPY_FD_STEP = 1e-3
ENTROPY_LIMIT_TIME = 15.0
LATTICE_DEPTH = 20


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    kind: str
    omega: Optional[float] = None
    a: Optional[float] = None


@dataclass(frozen=True)
class ExperimentSection:
    kind: str
    density: str = "uniform"
    epsilon: float = 0.5
    p: tuple[float, ...] = (1.0, 2.0)
    f: str = "identity"


@dataclass(frozen=True)
class MeasureConfig:
    kind: str = "closed-form"
    branch: str = "forward"
    burn_in: int = 1000
    samples: int = 100_000


@dataclass(frozen=True)
class NumericsConfig:
    h: float = 1e-3
    quad_nodes: int = 4096
    dyadic_depth: Optional[int] = None
    times: Optional[tuple[float, ...]] = None
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    experiment: ExperimentSection
    measure: MeasureConfig = MeasureConfig()
    numerics: NumericsConfig = NumericsConfig()
    output_dir: str = "edlab-out"

    def resolved_times(self) -> tuple[float, ...]:
        if self.numerics.times is not None:
            return self.numerics.times
        if self.experiment.kind == "weak-convergence-probe":
            return tuple(float(n) for n in range(31))
        return tuple(float(n) for n in range(11))


_SECTIONS = {
    "system": SystemConfig,
    "experiment": ExperimentSection,
    "measure": MeasureConfig,
    "numerics": NumericsConfig,
}


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        if re.match(rf"^\s*\[{re.escape(section)}\]\s*(#.*)?$", line):
            start = i
            if key is None:
                return i + 1
            continue
        if start is not None:
            if re.match(r"^\s*\[", line):
                break
            if re.match(rf"^\s*{re.escape(key)}\s*=", line):
                return i + 1
    return start + 1 if start is not None else None


def _coerce(section: str, key: str, value, text: str):
    where = _line_of(text, section, key)
    number = (int, float)
    if key in ("omega", "a", "epsilon", "h"):
        if isinstance(value, bool) or not isinstance(value, number):
            raise ConfigError(f"[{section}] {key} must be a number", where)
        return float(value)
    if key in ("burn_in", "samples", "quad_nodes", "dyadic_depth", "seed"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer", where)
        return value
    if key in ("p", "times"):
        items = value if isinstance(value, list) else [value]
        if not items or any(isinstance(v, bool) or not isinstance(v, number) for v in items):
            raise ConfigError(f"[{section}] {key} must be a number or a non-empty list of numbers",
                              where)
        return tuple(float(v) for v in items)
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string", where)
    return value


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", int(m.group(1)) if m else None) from exc

    unknown = set(raw) - set(_SECTIONS) - {"output"}
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown section [{name}]", _line_of(text, name))
    for required in ("system", "experiment"):
        if required not in raw:
            raise ConfigError(f"missing [{required}] section")

    parts = {}
    for section, cls in _SECTIONS.items():
        table = raw.get(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table", _line_of(text, section))
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in table.items():
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]", _line_of(text, section, key))
            kwargs[key] = _coerce(section, key, value, text)
        try:
            parts[section] = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"[{section}]: {exc}", _line_of(text, section)) from exc

    out = raw.get("output", {})
    extra = set(out) - {"dir"}
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key {key!r} in [output]", _line_of(text, "output", key))
    out_dir = out.get("dir", "edlab-out")
    if not isinstance(out_dir, str):
        raise ConfigError("[output] dir must be a string", _line_of(text, "output", "dir"))

    cfg = ExperimentConfig(parts["system"], parts["experiment"], parts["measure"],
                           parts["numerics"], out_dir)
    _validate(cfg, text)
    return cfg


def _validate(cfg: ExperimentConfig, text: str) -> None:
    def fail(msg, section, key=None):
        raise ConfigError(msg, _line_of(text, section, key))

    s, e, m, n = cfg.system, cfg.experiment, cfg.measure, cfg.numerics
    if s.kind not in catalog.SYSTEMS:
        fail(f"unknown system kind {s.kind!r}", "system", "kind")
    if s.kind == "circle" and s.omega is None:
        fail("circle system needs omega", "system")
    if s.kind == "baker" and s.a is not None and not 0.0 < s.a <= 0.5:
        fail("baker a must lie in (0, 1/2]", "system", "a")
    if e.kind not in EXPERIMENTS:
        fail(f"unknown experiment kind {e.kind!r}", "experiment", "kind")
    if e.density not in DENSITIES:
        fail(f"unknown density {e.density!r}", "experiment", "density")
    if not -1.0 < e.epsilon < 1.0:
        fail("epsilon must lie in (-1, 1)", "experiment", "epsilon")
    if e.f not in ("identity", "log"):
        fail("f must be 'identity' or 'log'", "experiment", "f")
    if any(p < 1 for p in e.p):
        fail("p must be >= 1", "experiment", "p")
    if m.kind not in ("closed-form", "empirical"):
        fail(f"unknown measure kind {m.kind!r}", "measure", "kind")
    if m.branch not in ("forward", "backward"):
        fail("branch must be 'forward' or 'backward'", "measure", "branch")
    if m.samples < 1 or m.burn_in < 0:
        fail("need samples >= 1 and burn_in >= 0", "measure")
    if not n.h > 0:
        fail("h must be positive", "numerics", "h")
    if n.quad_nodes < 1:
        fail("quad_nodes must be >= 1", "numerics", "quad_nodes")
    if n.dyadic_depth is not None and n.dyadic_depth < 0:
        fail("dyadic_depth must be >= 0", "numerics", "dyadic_depth")
    times = cfg.resolved_times()
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        fail("times must be non-negative and strictly increasing", "numerics", "times")
    if s.kind == "baker" and any(t != int(t) for t in times):
        fail("baker times must be integers", "numerics", "times")


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    def table(obj):
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if v is None:
                continue
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    doc = {
        "system": table(cfg.system),
        "experiment": table(cfg.experiment),
        "measure": table(cfg.measure),
        "numerics": table(cfg.numerics),
        "output": {"dir": cfg.output_dir},
    }
    return tomli_w.dumps(doc)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def emit_csv(series: TimeSeries, path) -> None:
    """Write ``t,value`` rows with shortest round-trip float formatting."""
    if len(series) == 0:
        raise ValueError("refusing to write an empty series")
    lines = ["t,value"] + [f"{t!r},{v!r}" for t, v in zip(series.times, series.values)]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def read_csv(path) -> TimeSeries:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != "t,value":
        raise ValueError(f"{path}: missing 't,value' header")
    ts, vs = [], []
    for row in rows[1:]:
        t, v = row.split(",")
        ts.append(float(t))
        vs.append(float(v))
    return TimeSeries(ts, vs)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class ExperimentReport:
    kind: str
    system: str
    k_fit: float = math.nan
    k_formula: float = math.nan
    k_closed: float = math.nan
    max_residual: float = math.nan
    checks: list[Check] = field(default_factory=list)
    csv_paths: list[Path] = field(default_factory=list)
    report_path: Optional[Path] = None
    error: Optional[str] = None
    asserted: bool = True

    @property
    def gap_fit_formula(self) -> float:
        return abs(self.k_fit - self.k_formula)

    @property
    def gap_fit_closed(self) -> float:
        return abs(self.k_fit - self.k_closed)

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        if not self.asserted:
            return "unchecked"
        return "pass" if all(c.passed for c in self.checks) else "fail"

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "unchecked")

    def check(self, name: str, value: float, tol_key: str) -> Check:
        """Record ``|value| < TOLERANCES[tol_key]``."""
        tol = TOLERANCES[tol_key]
        value = abs(float(value))
        c = Check(name, value, tol, value < tol)
        self.checks.append(c)
        return c

    def require(self, name: str, ok: bool, value: float = math.nan) -> Check:
        c = Check(name, float(value), 0.0, bool(ok))
        self.checks.append(c)
        return c

    def render(self) -> str:
        values = {
            "k_fit": self.k_fit,
            "k_formula": self.k_formula,
            "k_closed": self.k_closed,
            "gap_fit_formula": self.gap_fit_formula,
            "gap_fit_closed": self.gap_fit_closed,
            "max_residual": self.max_residual,
            "status": self.status,
        }
        lines = [f"{k} = {values[k]!r}" if k != "status" else f"{k} = {values[k]}"
                 for k in REPORT_KEYS]
        if self.error is not None:
            lines.append(f"error = {self.error}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _quad_for(cfg: ExperimentConfig, system) -> QuadratureRule:
    if isinstance(system, ContinuousSystem):
        return QuadratureRule.circle(cfg.numerics.quad_nodes)
    depth = cfg.numerics.dyadic_depth
    if depth is None:
        depth = int(max(cfg.resolved_times())) + 2
    return QuadratureRule.dyadic(depth)


def _density(cfg: ExperimentConfig, system, quad, nu=None):
    e = cfg.experiment
    if e.density == "uniform":
        return uniform_density(system)
    if e.density == "cosine-bump":
        return cosine_bump(system, e.epsilon)
    if not isinstance(nu, AbsContinuous):
        raise ConfigError("stationary-perturbed density needs an absolutely continuous measure")
    return stationary_perturbed(system, nu.rho_bar, e.epsilon, quad)


def _measure(cfg: ExperimentConfig, system, quad):
    m = cfg.measure
    if isinstance(system, ContinuousSystem):
        if m.kind == "empirical":
            raise ConfigError("empirical measures are only available for maps")
        omega = system.params["omega"]
        if abs(omega) == 1.0:
            xp, _ = catalog.circle_fixed_points(omega)
            return Atomic(np.array([[xp]]), np.array([1.0]))
        return catalog.circle_stationary(omega, quad, backward=(m.branch == "backward"))
    if m.kind == "empirical":
        return birkhoff_empirical(system, None, m.burn_in, m.samples, cfg.numerics.seed)
    if not system.volume_preserving:
        raise ConfigError("the dissipative baker has no closed-form stationary measure; "
                          "use [measure] kind = \"empirical\"")
    return lebesgue(quad)


def _k_closed(system, branch: str) -> float:
    if isinstance(system, ContinuousSystem):
        k = catalog.circle_K_closed_form(system.params["omega"])
        return -k if branch == "backward" else k
    return -math.log(2.0 * system.params["a"]) + 0.0


def _run_k_slope(cfg, system, rep, out, icfg):
    quad = _quad_for(cfg, system)
    nu = _measure(cfg, system, quad)
    ev = _density(cfg, system, quad, nu)
    times = cfg.resolved_times()
    series = log_density_series(ev, nu, times, icfg)
    _write(series, out / "log_density.csv", rep)
    rep.k_fit = series.fit.slope
    rep.max_residual = series.fit.max_abs_residual
    rep.k_closed = _k_closed(system, cfg.measure.branch)
    if isinstance(system, ContinuousSystem):
        rep.k_formula = K_from_divergence(nu, system)
        if abs(system.params["omega"]) == 1.0:
            rep.asserted = False
            return
    else:
        rep.k_formula = K_from_log_jacobian(nu, system)

    if isinstance(nu, AbsContinuous) and isinstance(system, ContinuousSystem):
        rep.check("|K_formula|", rep.k_formula, "k_formula_ac")
        rep.check("|K_fit|", rep.k_fit, "k_fit_ac")
        return
    if isinstance(system, ContinuousSystem) or not system.volume_preserving:
        rep.check("gap_fit_formula", rep.gap_fit_formula, "k_gap")
        rep.check("gap_fit_closed", rep.gap_fit_closed, "k_gap")
    else:
        rep.check("|K_fit|", rep.k_fit, "k_volume_preserving")
        rep.check("|K_formula|", rep.k_formula, "k_volume_preserving")
    key = {Atomic: "k_residual_atomic", AbsContinuous: "k_residual_ac"}.get(
        type(nu), "k_residual_empirical")
    rep.check("max_residual", rep.max_residual, key)


def _run_bp(cfg, system, rep, out, icfg):
    if not isinstance(system, ContinuousSystem) or abs(system.params["omega"]) <= 1.0:
        raise ConfigError("bp-invariance needs the circle flow with |omega| > 1")
    quad = _quad_for(cfg, system)
    nu = _measure(cfg, system, quad)
    ev = _density(cfg, system, quad, nu)
    times = cfg.resolved_times()
    worst = 0.0
    b1 = None
    for p in cfg.experiment.p:
        series = bp_invariant(ev, nu, p, times, icfg)
        _write(series, out / f"bp_p{p:g}.csv", rep)
        dev = series.max_relative_deviation
        worst = max(worst, dev)
        rep.check(f"B_{p:g} relative deviation", dev, "bp_relative")
        if p == 1.0:
            b1 = series
    if b1 is not None:
        floor = min(b1.values) - 0.5 * b1.values[0]
        rep.require("B_1(t) >= B_1(0)/2 > 0", floor >= 0 and b1.values[0] > 0, floor)
        l2 = l2_gap_series(ev, nu, times, icfg)
        _write(l2, out / "l2_gap.csv", rep)
        margin = min(g - b * b / system.domain.volume for g, b in zip(l2.values, b1.values))
        rep.require("int |rho - rho_bar|^2 >= B_1^2/|M|", margin >= -1e-12, margin)
    rep.max_residual = worst


def _run_entropy(cfg, system, rep, out, icfg):
    times = cfg.resolved_times()
    if not isinstance(system, ContinuousSystem):
        if not system.volume_preserving:
            raise ConfigError("entropy-rate on maps is defined for the area-preserving baker only")
        quad = _quad_for(cfg, system)
        ev = _density(cfg, system, quad)
        logser, ent = log_density_and_entropy_series(ev, quad, times, icfg)
        _write(logser, out / "log_density.csv", rep)
        _write(ent, out / "gibbs_entropy.csv", rep)
        rep.k_fit = logser.fit.slope
        rep.k_closed = 0.0
        rep.max_residual = max(ent.max_deviation, logser.max_deviation)
        rep.check("max |S(n) - S(0)|", ent.max_deviation, "entropy_constancy")
        rep.check("max |nu(log rho(n)) - nu(log rho(0))|", logser.max_deviation, "entropy_constancy")
        return

    quad = _quad_for(cfg, system)
    ev = _density(cfg, system, quad)
    d = ENTROPY_FD_STEP
    rates = entropy_rates(ev, times, quad, icfg)
    _write(TimeSeries(list(times), rates), out / "entropy_rate.csv", rep)
    shifted = sorted({t - d for t in times} | {t + d for t in times} | set(times))
    s_vals = dict(zip(shifted, lagrangian_gibbs_entropies(ev, shifted, quad, icfg)))
    _write(TimeSeries(list(times), [s_vals[t] for t in times]), out / "gibbs_entropy.csv", rep)
    worst = 0.0
    for t, rate in zip(times, rates):
        fd = (s_vals[t + d] - s_vals[t - d]) / (2.0 * d)
        worst = max(worst, abs(fd - rate))
    rep.max_residual = worst
    rep.check("max |dS/dt - mu_t(div v)|", worst, "entropy_rate_fd")
    omega = system.params["omega"]
    rep.k_formula = -rates[-1]
    rep.k_closed = catalog.circle_K_closed_form(omega)
    if times[-1] >= ENTROPY_LIMIT_TIME and abs(omega) < 1.0:
        rep.check("|-mu_t(div v) - K_plus| at final time", rep.k_formula - rep.k_closed,
                  "entropy_rate_limit")


def _run_ratio(cfg, system, rep, out, icfg):
    quad = _quad_for(cfg, system)
    nu = _measure(cfg, system, quad)
    ev1 = _density(cfg, system, quad, nu)
    if cfg.experiment.density == "uniform":
        ev1 = cosine_bump(system, cfg.experiment.epsilon)
    ev2 = uniform_density(system)
    f = np.log if cfg.experiment.f == "log" else (lambda g: g)
    series = ratio_invariant(ev1, ev2, nu, f, cfg.resolved_times(), icfg)
    _write(series, out / f"ratio_{cfg.experiment.f}.csv", rep)
    rep.max_residual = series.max_deviation
    rep.check("max ratio deviation", series.max_deviation, "ratio_constancy")


def _run_reversibility(cfg, system, rep, out, icfg):
    if not isinstance(system, ContinuousSystem):
        raise ConfigError("reversibility needs the circle flow")
    omega = system.params["omega"]
    rng = np.random.default_rng(cfg.numerics.seed)
    t_max = max(cfg.resolved_times()) if cfg.numerics.times is not None else 5.0
    xs = rng.uniform(-math.pi, math.pi, 100)
    ts = np.sort(rng.uniform(0.0, t_max, 100))
    res = [float(check_reversal(system, x, t, icfg)) for x, t in zip(xs, ts)]
    _write(TimeSeries([float(t) for t in ts], res), out / "reversal_residual.csv", rep)
    rep.max_residual = max(res)
    rep.check("max reversal residual", rep.max_residual, "reversal_residual")
    if abs(omega) == 1.0:
        rep.asserted = False
        return
    kp, km = reversibility_K_pair(omega)
    closed = catalog.circle_K_closed_form(omega)
    rep.k_formula = kp
    rep.k_closed = closed
    rep.require("K_plus == closed form", kp == closed, kp)
    rep.require("K_minus == -closed form", km == -closed, km)
    if abs(omega) < 1.0:
        nu = catalog.circle_stationary(omega)
        series = log_density_series(uniform_density(system), nu, cfg.resolved_times(), icfg)
        _write(series, out / "log_density.csv", rep)
        rep.k_fit = series.fit.slope
    else:
        rep.k_fit = 0.0


def _run_weak(cfg, system, rep, out, icfg):
    if isinstance(system, ContinuousSystem):
        raise ConfigError("weak-convergence-probe runs on the baker maps only")
    a = system.params["a"]
    quad = QuadratureRule.doubling_lattice(LATTICE_DEPTH)
    ev = _density(cfg, system, quad)
    times = cfg.resolved_times()
    emp = birkhoff_empirical(system, None, cfg.measure.burn_in, cfg.measure.samples,
                             cfg.numerics.seed)
    funcs = {
        "x": lambda p: p[..., 0],
        "y": lambda p: p[..., 1],
        "xy": lambda p: p[..., 0] * p[..., 1],
    }
    worst = 0.0
    for name, f in funcs.items():
        vals = pushforward_expectations(ev, f, times, quad, icfg)
        _write(TimeSeries(list(times), vals), out / f"mu_n_{name}.csv", rep)
        gap = vals[-1] - expect(emp, f)
        worst = max(worst, abs(gap))
        rep.check(f"|mu_n({name}) - empirical|", gap, "weak_vs_empirical")
        if name == "y":
            rep.check("|mu_n(y) - y_SRB|", vals[-1] - 1.0 / (4.0 * (1.0 - a)), "weak_limit")
    rep.max_residual = worst
    rep.k_formula = K_from_log_jacobian(emp, system)
    rep.k_closed = _k_closed(system, "forward")


_RUNNERS = {
    "k-slope": _run_k_slope,
    "bp-invariance": _run_bp,
    "entropy-rate": _run_entropy,
    "ratio-invariance": _run_ratio,
    "reversibility": _run_reversibility,
    "weak-convergence-probe": _run_weak,
}


def _write(series: TimeSeries, path: Path, rep: ExperimentReport) -> None:
    emit_csv(series, path)
    rep.csv_paths.append(path)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one experiment, write its CSVs and ``report.txt``, return the report.

    Numerical failures are recorded in the report with status ``error``.
    """
    system = catalog.make_system(cfg.system.kind, cfg.system.omega, cfg.system.a)
    icfg = IntegratorConfig(h=cfg.numerics.h)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = ExperimentReport(cfg.experiment.kind, system.name)
    log.info("running %s on %s", cfg.experiment.kind, system.name)
    try:
        _RUNNERS[cfg.experiment.kind](cfg, system, rep, out, icfg)
    except ConfigError:
        raise
    except (EdlabError, ArithmeticError, ValueError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s failed: %s", cfg.experiment.kind, rep.error)
    rep.report_path = out / "report.txt"
    with open(rep.report_path, "w", newline="\n") as fh:
        fh.write(rep.render())
    return rep
