"""Exact transport of densities along orbits.

``rho(x, t) = rho0(T_{-t} x) * J(x, t)`` is evaluated in log space from
backward orbits.  Expectations under the evolved measure use the
Lagrangian form ``mu_t(f) = int f(T_t x) rho0(x) dx`` on a fixed
quadrature rule, which needs forward orbits only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .dynsys import (
    DEFAULT_CONFIG,
    Circle,
    ContinuousSystem,
    DiscreteSystem,
    IntegratorConfig,
    UnitSquare,
    backward_orbits,
    forward_orbits_with_contraction,
    map_backward_orbits,
    map_forward,
)

__all__ = [
    "QuadratureRule",
    "DensityEvolution",
    "Density",
    "uniform_density",
    "cosine_bump",
    "stationary_perturbed",
    "log_density_at",
    "log_density_checkpoints",
    "density_at",
    "pushforward_expectation",
    "pushforward_expectations",
    "lagrangian_gibbs_entropy",
    "lagrangian_gibbs_entropies",
    "eulerian_gibbs_entropy",
]

DEFAULT_CHUNK = 1 << 20


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Equal-weight product rule on the circle or the unit square.

    ``kind`` is one of:

    * ``"circle-midpoint"``: ``n`` nodes at cell midpoints of [-pi, pi).
    * ``"dyadic-midpoint"``: tensor midpoints of the dyadic grid with
      ``2**depth`` cells in x and ``2**y_depth`` in y.  Nodes never sit on
      a dyadic line, where the baker maps are discontinuous.
    * ``"doubling-lattice"``: x nodes ``i / (2**depth - 1)`` (a set the
      doubling map permutes), y at dyadic midpoints.  Forward baker orbits
      of these nodes stay on the lattice instead of collapsing to x = 0
      the way finite-precision dyadic nodes do.

    Nodes are generated lazily in chunks, so rules with ~10^7 nodes do not
    have to be held in memory.
    """

    kind: str
    n: int = 0
    depth: int = 0
    y_depth: int = 0

    def __post_init__(self):
        if self.kind == "circle-midpoint":
            if self.n < 1:
                raise ValueError("circle rule needs n >= 1")
        elif self.kind in ("dyadic-midpoint", "doubling-lattice"):
            if self.depth < 0 or self.y_depth < 0:
                raise ValueError("depths must be >= 0")
            if self.kind == "doubling-lattice" and self.depth < 1:
                raise ValueError("doubling lattice needs depth >= 1")
        else:
            raise ValueError(f"unknown quadrature kind {self.kind!r}")

    @classmethod
    def circle(cls, n: int = 4096) -> "QuadratureRule":
        return cls("circle-midpoint", n=n)

    @classmethod
    def dyadic(cls, depth: int, y_depth: int | None = None) -> "QuadratureRule":
        return cls("dyadic-midpoint", depth=depth, y_depth=depth if y_depth is None else y_depth)

    @classmethod
    def doubling_lattice(cls, depth: int = 20, y_depth: int = 0) -> "QuadratureRule":
        return cls("doubling-lattice", depth=depth, y_depth=y_depth)

    @property
    def descriptor(self) -> str:
        if self.kind == "circle-midpoint":
            return f"circle-midpoint(N={self.n})"
        return f"{self.kind}(depth={self.depth}, y_depth={self.y_depth})"

    @property
    def dim(self) -> int:
        return 1 if self.kind == "circle-midpoint" else 2

    @property
    def volume(self) -> float:
        return 2.0 * math.pi if self.dim == 1 else 1.0

    def _x_axis(self) -> np.ndarray:
        if self.kind == "circle-midpoint":
            return -math.pi + (np.arange(self.n) + 0.5) * (2.0 * math.pi / self.n)
        if self.kind == "dyadic-midpoint":
            m = 1 << self.depth
            return (np.arange(m) + 0.5) / m
        m = (1 << self.depth) - 1
        return np.arange(m) / m

    def _y_axis(self) -> np.ndarray:
        m = 1 << self.y_depth
        return (np.arange(m) + 0.5) / m

    @property
    def size(self) -> int:
        if self.dim == 1:
            return self.n
        return len(self._x_axis()) * (1 << self.y_depth)

    def chunks(self, max_nodes: int = DEFAULT_CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(nodes, weights)`` blocks in a fixed order."""
        xs = self._x_axis()
        if self.dim == 1:
            w = self.volume / self.n
            for s in range(0, self.n, max_nodes):
                block = xs[s:s + max_nodes]
                yield block.reshape(-1, 1), np.full(block.shape[0], w)
            return
        ys = self._y_axis()
        w = 1.0 / (len(xs) * len(ys))
        rows = max(1, max_nodes // len(ys))
        for s in range(0, len(xs), rows):
            xb = xs[s:s + rows]
            nodes = np.empty((len(xb) * len(ys), 2))
            nodes[:, 0] = np.repeat(xb, len(ys))
            nodes[:, 1] = np.tile(ys, len(xb))
            yield nodes, np.full(nodes.shape[0], w)

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([n for n, _ in self.chunks()])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([w for _, w in self.chunks()])

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """Sum ``w_i * fn(nodes_i)``, reduced chunk by chunk in fixed order."""
        return math.fsum(float(np.sum(w * fn(nodes))) for nodes, w in self.chunks())


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityEvolution:
    """An initial density paired with the system that transports it."""

    rho0: Callable[[np.ndarray], np.ndarray]
    log_rho0: Callable[[np.ndarray], np.ndarray]
    system: ContinuousSystem | DiscreteSystem
    label: str = "custom"

    @property
    def continuous(self) -> bool:
        return isinstance(self.system, ContinuousSystem)

    def with_system(self, system) -> "DensityEvolution":
        return DensityEvolution(self.rho0, self.log_rho0, system, self.label)


@dataclass(frozen=True)
class Density:
    """Result of :func:`density_at`; ``underflow`` is set if any value hit 0."""

    value: np.ndarray
    underflow: bool


def _axis0(x: np.ndarray) -> np.ndarray:
    return x[..., 0]


def uniform_density(system) -> DensityEvolution:
    vol = system.domain.volume
    log_c = -math.log(vol)

    def rho(x):
        return np.full(np.shape(x)[:-1], 1.0 / vol)

    def log_rho(x):
        return np.full(np.shape(x)[:-1], log_c)

    return DensityEvolution(rho, log_rho, system, "uniform")


def cosine_bump(system, epsilon: float) -> DensityEvolution:
    """``(1 + eps cos x) / 2pi`` on the circle, ``1 + eps cos 2 pi x`` on the square.

    On the square the bump varies along x only.
    """
    if not -1.0 < epsilon < 1.0:
        raise ValueError("cosine bump needs |epsilon| < 1")
    if isinstance(system.domain, Circle):
        log_c = -math.log(2.0 * math.pi)

        def phase(x):
            return np.cos(_axis0(x))
    else:
        log_c = 0.0

        def phase(x):
            return np.cos(2.0 * math.pi * _axis0(x))

    def rho(x):
        return math.exp(log_c) * (1.0 + epsilon * phase(x))

    def log_rho(x):
        return np.log1p(epsilon * phase(x)) + log_c

    return DensityEvolution(rho, log_rho, system, f"cosine-bump({epsilon!r})")


def stationary_perturbed(system, rho_bar, epsilon: float, quad: QuadratureRule) -> DensityEvolution:
    """``rho_bar * (1 + eps sin x) / Z`` with ``Z`` fixed by ``quad``."""
    if not -1.0 < epsilon < 1.0:
        raise ValueError("perturbation needs |epsilon| < 1")
    if isinstance(system.domain, UnitSquare):
        def phase(x):
            return np.sin(2.0 * math.pi * _axis0(x))
    else:
        def phase(x):
            return np.sin(_axis0(x))

    z = quad.integrate(lambda x: rho_bar(x) * (1.0 + epsilon * phase(x)))
    log_z = math.log(z)

    def rho(x):
        return rho_bar(x) * (1.0 + epsilon * phase(x)) / z

    def log_rho(x):
        return np.log(rho_bar(x)) + np.log1p(epsilon * phase(x)) - log_z

    return DensityEvolution(rho, log_rho, system, f"stationary-perturbed({epsilon!r})")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _log_rho0_points(ev: DensityEvolution, pts: np.ndarray) -> np.ndarray:
    dim = ev.system.dim
    flat = np.asarray(pts, dtype=float).reshape(-1, dim)
    return ev.log_rho0(flat)


def log_density_checkpoints(ev: DensityEvolution, x, times: Sequence[float],
                            cfg: IntegratorConfig = DEFAULT_CONFIG) -> list[np.ndarray]:
    """``log rho(x, t)`` for each of the non-decreasing ``times``; one orbit pass."""
    if ev.continuous:
        orbits = backward_orbits(ev.system, x, times, cfg)
    else:
        horizons = []
        for t in times:
            if int(t) != t:
                raise ValueError(f"discrete-time horizon must be an integer, got {t!r}")
            horizons.append(int(t))
        orbits = map_backward_orbits(ev.system, x, horizons)
    out = []
    for pts, logj in orbits:
        out.append(_log_rho0_points(ev, pts).reshape(np.shape(logj)) + logj)
    return out


def log_density_at(ev: DensityEvolution, x, t: float,
                   cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``log rho0(T_{-t}x) + log J(x, t)``, never leaving log space."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return log_density_checkpoints(ev, x, [t], cfg)[0]


def density_at(ev: DensityEvolution, x, t: float,
               cfg: IntegratorConfig = DEFAULT_CONFIG) -> Density:
    logv = log_density_at(ev, x, t, cfg)
    with np.errstate(under="ignore", over="ignore"):
        val = np.exp(logv)
    return Density(val, bool(np.any(val == 0.0)))


def _forward_points(ev: DensityEvolution, nodes: np.ndarray, times, cfg):
    if ev.continuous:
        return [p for p, _ in forward_orbits_with_contraction(ev.system, nodes, times, cfg)]
    out = []
    pts = nodes
    done = 0
    for t in times:
        n = int(t)
        if n != t or n < done:
            raise ValueError("discrete times must be non-decreasing integers")
        pts = map_forward(ev.system, pts, n - done)
        done = n
        out.append(pts)
    return out


def pushforward_expectations(ev: DensityEvolution, f, times: Sequence[float],
                             quad: QuadratureRule,
                             cfg: IntegratorConfig = DEFAULT_CONFIG) -> list[float]:
    """``sum_i w_i f(T_t x_i) rho0(x_i)`` for each time, one forward pass per chunk."""
    totals = [0.0] * len(times)
    for nodes, w in quad.chunks():
        base = w * ev.rho0(nodes)
        for k, pts in enumerate(_forward_points(ev, nodes, times, cfg)):
            totals[k] += float(np.sum(base * f(pts)))
    return totals


def pushforward_expectation(ev: DensityEvolution, f, t: float, quad: QuadratureRule,
                            cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    return pushforward_expectations(ev, f, [t], quad, cfg)[0]


def lagrangian_gibbs_entropies(ev: DensityEvolution, times: Sequence[float],
                               quad: QuadratureRule,
                               cfg: IntegratorConfig = DEFAULT_CONFIG) -> list[float]:
    """``S(t) = -sum_i w_i rho0(x_i) [log rho0(x_i) - Lambda(x_i, t)]`` per time.

    ``Lambda(x, t)`` is the log volume expansion of ``T_t`` at x.  Negative
    times are allowed (the flow is invertible): there ``Lambda(x, -s)`` is the
    backward log-Jacobian ``log J(x, s)``.
    """
    if not ev.continuous:
        raise TypeError("Lagrangian Gibbs entropy needs a continuous-time system")
    times = [float(t) for t in times]
    neg = sorted({-t for t in times if t < 0})
    pos = sorted({t for t in times if t >= 0})
    parts: dict[float, list[float]] = {t: [] for t in times}
    for nodes, w in quad.chunks():
        r0 = ev.rho0(nodes)
        lr0 = ev.log_rho0(nodes)
        lams = {}
        if pos:
            for t, (_, lam) in zip(pos, forward_orbits_with_contraction(ev.system, nodes, pos, cfg)):
                lams[t] = lam
        if neg:
            for s, (_, logj) in zip(neg, backward_orbits(ev.system, nodes, neg, cfg)):
                lams[-s] = logj
        for t in parts:
            parts[t].append(-float(np.sum(w * r0 * (lr0 - lams[t]))))
    return [math.fsum(parts[t]) for t in times]


def lagrangian_gibbs_entropy(ev: DensityEvolution, t: float, quad: QuadratureRule,
                             cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    return lagrangian_gibbs_entropies(ev, [t], quad, cfg)[0]


def eulerian_gibbs_entropy(ev: DensityEvolution, times: Sequence[float],
                           quad: QuadratureRule,
                           cfg: IntegratorConfig = DEFAULT_CONFIG) -> list[float]:
    """``-int rho log rho dx`` on a fixed grid, rho from backward orbits.

    Only trustworthy when the grid resolves ``rho(., t)``; for the baker map
    that means a dyadic rule of depth above the horizon.
    """
    totals = [0.0] * len(times)
    for nodes, w in quad.chunks():
        for k, logv in enumerate(log_density_checkpoints(ev, nodes, times, cfg)):
            with np.errstate(under="ignore"):
                totals[k] -= float(np.sum(w * np.exp(logv) * logv))
    return totals
