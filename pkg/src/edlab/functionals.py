"""Scalar functionals of evolving densities and their slopes.

The central object is the series ``t -> nu(log rho(., t))``, which is exactly
linear in t for any stationary ``nu``.  Its slope K is estimated three ways:
least-squares fit of the series, ``-nu(div v)`` (flows) or
``nu(log J)`` (maps), and a closed form where the catalog has one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import circle_fixed_points, make_circle_flow
from .dynsys import DEFAULT_CONFIG, ContinuousSystem, DiscreteSystem, IntegratorConfig
from .errors import DegenerateOmegaError, DegenerateTimesError, EvaluationError
from .measures import AbsContinuous, Empirical, StationaryMeasure, atomic, block_sum, expect
from .transport import (
    DensityEvolution,
    QuadratureRule,
    log_density_checkpoints,
    pushforward_expectations,
)

__all__ = [
    "LinearFit",
    "TimeSeries",
    "fit_linear",
    "log_density_series",
    "K_from_divergence",
    "K_from_log_jacobian",
    "entropy_rate",
    "entropy_rates",
    "bp_invariant",
    "ratio_invariant",
    "reversibility_K_pair",
    "log_density_and_entropy_series",
    "l2_gap_series",
]


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    max_abs_residual: float


@dataclass
class TimeSeries:
    times: list[float]
    values: list[float]
    fit: Optional[LinearFit] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def max_deviation(self) -> float:
        """Largest ``|values[k] - values[0]|``."""
        if not self.values:
            return 0.0
        v0 = self.values[0]
        return max(abs(v - v0) for v in self.values)

    @property
    def max_relative_deviation(self) -> float:
        v0 = self.values[0]
        if v0 == 0:
            return self.max_deviation
        return self.max_deviation / abs(v0)


def fit_linear(series: TimeSeries | tuple[Sequence[float], Sequence[float]]) -> LinearFit:
    """Ordinary least squares ``value ~ intercept + slope * t``."""
    if isinstance(series, TimeSeries):
        t, y = series.times, series.values
    else:
        t, y = series
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.unique(t).size < 2:
        raise DegenerateTimesError("linear fit needs at least two distinct times")
    tm = float(np.mean(t))
    ym = float(np.mean(y))
    dt = t - tm
    slope = float(np.sum(dt * (y - ym)) / np.sum(dt * dt))
    intercept = ym - slope * tm
    resid = y - (intercept + slope * t)
    return LinearFit(slope, intercept, float(np.max(np.abs(resid))))


def _with_fit(times, values, **meta) -> TimeSeries:
    s = TimeSeries(list(map(float, times)), list(map(float, values)), meta=meta)
    if len(set(s.times)) >= 2:
        s.fit = fit_linear(s)
    else:
        s.fit = LinearFit(0.0, s.values[0], 0.0)
    return s


def _sorted_times(times) -> list[float]:
    times = [float(t) for t in times]
    if not times:
        raise ValueError("times must be non-empty")
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise ValueError("times must be non-negative and strictly increasing")
    return times


def _measure_series(nu: StationaryMeasure, times: Sequence[float],
                    per_block: Callable[[np.ndarray], list[np.ndarray]]) -> list[float]:
    """``[nu(h_k) for k]`` where ``per_block(points)`` returns every ``h_k(points)``."""
    parts: list[list[float]] = [[] for _ in times]
    for pts, w in nu.blocks():
        rows = per_block(pts)
        for k, vals in enumerate(rows):
            vals = np.asarray(vals, dtype=float).reshape(w.shape)
            bad = ~np.isfinite(vals) & (w != 0)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise EvaluationError(
                    f"non-finite value at t={times[k]!r}, x={pts[i]!r}",
                    point=pts[i], time=times[k],
                )
            parts[k].append(block_sum(w * vals, nu.compensated))
    return [math.fsum(p) / nu.scale for p in parts]


# ---------------------------------------------------------------------------
# nu(log rho) and K
# ---------------------------------------------------------------------------


def _empirical_log_density(ev: DensityEvolution, nu: Empirical, times) -> list[float]:
    # Sample k pairs with its stored preimage k - n; no inverse map needed.
    system = ev.system
    out = []
    for t in times:
        n = int(t)
        if n != t:
            raise ValueError("empirical series need integer horizons")
        if n > nu.burn_in:
            raise EvaluationError(f"horizon {n} exceeds burn-in {nu.burn_in}", time=t)
        logj = np.zeros(nu.n_samples)
        for j in range(n):
            logj += system.log_jac_inv(nu.preimages(j))
        vals = ev.log_rho0(nu.preimages(n)) + logj
        out.append(math.fsum(vals) / vals.size)
    return out


def log_density_series(ev: DensityEvolution, nu: StationaryMeasure, times,
                       cfg: IntegratorConfig = DEFAULT_CONFIG) -> TimeSeries:
    """``nu(log rho(., t))`` at each time, with a least-squares fit."""
    times = _sorted_times(times)
    if isinstance(nu, Empirical) and isinstance(ev.system, DiscreteSystem):
        values = _empirical_log_density(ev, nu, times)
    else:
        values = _measure_series(nu, times, lambda pts: log_density_checkpoints(ev, pts, times, cfg))
    return _with_fit(times, values)


def K_from_divergence(nu: StationaryMeasure, system: ContinuousSystem) -> float:
    return -expect(nu, system.divergence)


def K_from_log_jacobian(nu: StationaryMeasure, system: DiscreteSystem) -> float:
    return expect(nu, system.log_jac_inv)


def reversibility_K_pair(omega: float, allow_degenerate: bool = False) -> tuple[float, float]:
    """``(K_plus, K_minus)`` from point masses at the two fixed points."""
    if abs(omega) == 1.0:
        if allow_degenerate:
            return 0.0, 0.0
        raise DegenerateOmegaError("K pair undefined at |omega| = 1")
    if abs(omega) > 1.0:
        return 0.0, 0.0
    system = make_circle_flow(omega)
    xp, xm = circle_fixed_points(omega)
    return (K_from_divergence(atomic([xp], [1.0], system), system),
            K_from_divergence(atomic([xm], [1.0], system), system))


# ---------------------------------------------------------------------------
# Entropy rate
# ---------------------------------------------------------------------------


def entropy_rates(ev: DensityEvolution, times, quad: QuadratureRule,
                  cfg: IntegratorConfig = DEFAULT_CONFIG) -> list[float]:
    if not ev.continuous:
        raise TypeError("entropy rate needs a continuous-time system")
    return pushforward_expectations(ev, ev.system.divergence, _sorted_times(times), quad, cfg)


def entropy_rate(ev: DensityEvolution, t: float, quad: QuadratureRule,
                 cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """``mu_t(div v)``, the time derivative of the Gibbs entropy."""
    return entropy_rates(ev, [t], quad, cfg)[0]


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------


def bp_invariant(ev: DensityEvolution, nu_ac: AbsContinuous, p: float, times,
                 cfg: IntegratorConfig = DEFAULT_CONFIG) -> TimeSeries:
    """``int |rho(x,t)/rho_bar(x) - 1|^p rho_bar(x) dx`` per time.

    The ratio is formed as ``exp(log rho - log rho_bar)`` so it stays
    moderate even where ``rho`` alone would overflow.
    """
    if not isinstance(nu_ac, AbsContinuous):
        raise TypeError("B_p needs an absolutely continuous measure")
    if p < 1:
        raise ValueError("B_p needs p >= 1")
    times = _sorted_times(times)

    def per_block(pts):
        log_bar = nu_ac.log_rho_bar(pts)
        rows = []
        for logv in log_density_checkpoints(ev, pts, times, cfg):
            ratio = np.exp(logv.reshape(log_bar.shape) - log_bar)
            rows.append(np.abs(ratio - 1.0) ** p)
        return rows

    values = _measure_series(nu_ac, times, per_block)
    return TimeSeries(times, values, meta={"p": p})


def ratio_invariant(ev1: DensityEvolution, ev2: DensityEvolution, nu: StationaryMeasure,
                    f: Callable[[np.ndarray], np.ndarray], times,
                    cfg: IntegratorConfig = DEFAULT_CONFIG) -> TimeSeries:
    """``nu(f(rho1(., t) / rho2(., t)))`` per time; constant for stationary nu."""
    times = _sorted_times(times)

    def per_block(pts):
        l1 = log_density_checkpoints(ev1, pts, times, cfg)
        l2 = log_density_checkpoints(ev2, pts, times, cfg)
        return [f(np.exp(a - b)) for a, b in zip(l1, l2)]

    values = _measure_series(nu, times, per_block)
    return TimeSeries(times, values)


def log_density_and_entropy_series(ev: DensityEvolution, quad: QuadratureRule, times,
                                   cfg: IntegratorConfig = DEFAULT_CONFIG
                                   ) -> tuple[TimeSeries, TimeSeries]:
    """``nu(log rho(., t))`` for normalized Lebesgue ``nu`` and ``-int rho log rho dx``.

    Both come from the same backward orbits of the grid nodes, so a large
    dyadic rule is traversed once.
    """
    times = _sorted_times(times)
    vol = quad.volume
    log_parts: list[list[float]] = [[] for _ in times]
    ent_parts: list[list[float]] = [[] for _ in times]
    for nodes, w in quad.chunks():
        for k, logv in enumerate(log_density_checkpoints(ev, nodes, times, cfg)):
            if not np.all(np.isfinite(logv)):
                i = int(np.flatnonzero(~np.isfinite(logv))[0])
                raise EvaluationError(f"log density not finite at {nodes[i]!r}", point=nodes[i],
                                      time=times[k])
            log_parts[k].append(float(np.sum(w * logv)))
            with np.errstate(under="ignore"):
                ent_parts[k].append(-float(np.sum(w * np.exp(logv) * logv)))
    log_vals = [math.fsum(p) / vol for p in log_parts]
    ent_vals = [math.fsum(p) for p in ent_parts]
    return _with_fit(times, log_vals), TimeSeries(times, ent_vals)


def l2_gap_series(ev: DensityEvolution, nu_ac: AbsContinuous, times,
                  cfg: IntegratorConfig = DEFAULT_CONFIG) -> TimeSeries:
    """``int |rho(x,t) - rho_bar(x)|^2 dx`` on the measure's quadrature rule."""
    times = _sorted_times(times)
    parts: list[list[float]] = [[] for _ in times]
    for nodes, w in nu_ac.quad.chunks():
        bar = nu_ac.rho_bar(nodes)
        for k, logv in enumerate(log_density_checkpoints(ev, nodes, times, cfg)):
            parts[k].append(float(np.sum(w * (np.exp(logv) - bar) ** 2)))
    return TimeSeries(times, [math.fsum(p) for p in parts])
