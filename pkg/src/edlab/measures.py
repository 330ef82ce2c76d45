"""Stationary measures: atomic, absolutely continuous, and orbit-sampled."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .dynsys import ContinuousSystem, DiscreteSystem
from .errors import EvaluationError, NonPositiveDensityError
from .transport import QuadratureRule

__all__ = [
    "Atomic",
    "AbsContinuous",
    "Empirical",
    "StationaryMeasure",
    "atomic",
    "expect",
    "normalize_density",
    "birkhoff_empirical",
    "lebesgue",
]


@dataclass(frozen=True)
class Atomic:
    points: np.ndarray      # (k, dim)
    weights: np.ndarray     # (k,)
    scale = 1.0
    compensated = True

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        yield self.points, self.weights


@dataclass(frozen=True)
class AbsContinuous:
    rho_bar: Callable[[np.ndarray], np.ndarray]
    quad: QuadratureRule
    scale = 1.0
    compensated = False

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for nodes, w in self.quad.chunks():
            yield nodes, w * self.rho_bar(nodes)

    def log_rho_bar(self, x: np.ndarray) -> np.ndarray:
        return np.log(self.rho_bar(x))


@dataclass(frozen=True)
class Empirical:
    """A stored orbit ``x_0 .. x_{B+S-1}``; samples are the entries from ``burn_in`` on.

    The full history is kept so a sample at index k can be paired with its
    exact n-step preimage at index k - n.
    """

    orbit: np.ndarray       # (B + S, dim)
    burn_in: int
    compensated = True

    @property
    def scale(self) -> float:
        return float(self.n_samples)

    @property
    def samples(self) -> np.ndarray:
        return self.orbit[self.burn_in:]

    @property
    def n_samples(self) -> int:
        return self.orbit.shape[0] - self.burn_in

    def preimages(self, n: int) -> np.ndarray:
        """Orbit entries ``k - n`` for every sample index ``k``."""
        if n > self.burn_in:
            raise ValueError(f"horizon {n} exceeds burn-in {self.burn_in}; no stored preimage")
        return self.orbit[self.burn_in - n:self.orbit.shape[0] - n]

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        # Unit weights; expect() divides by ``scale`` once at the end.
        s = self.samples
        yield s, np.ones(s.shape[0])


StationaryMeasure = Atomic | AbsContinuous | Empirical


def block_sum(values: np.ndarray, compensated: bool) -> float:
    """Exact-rounded ``fsum`` for sample sets, numpy pairwise sum for quadrature blocks."""
    return math.fsum(values) if compensated else float(np.sum(values))


def atomic(points, weights=None, system: Optional[ContinuousSystem | DiscreteSystem] = None,
           tol: float = 1e-12) -> Atomic:
    """Build an atomic measure; with ``system`` given, each point must be fixed."""
    dim = system.dim if system is not None else None
    pts = np.asarray(points, dtype=float)
    if dim == 1 or (dim is None and pts.ndim <= 1):
        pts = pts.reshape(-1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise ValueError("one weight per point required")
    if np.any(w < 0) or abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ValueError("atomic weights must be non-negative and sum to 1")
    if isinstance(system, ContinuousSystem):
        res = np.sqrt(np.sum(system.vector_field(pts) ** 2, axis=-1))
        if np.any(res >= tol):
            raise ValueError(f"points are not fixed points of the flow, |v| = {res.max():.3e}")
    elif isinstance(system, DiscreteSystem):
        res = system.domain.distance(system.forward(pts), pts)
        if np.any(res >= tol):
            raise ValueError(f"points are not fixed points of the map, residual {res.max():.3e}")
    return Atomic(pts, w)


def expect(nu: StationaryMeasure, h: Callable[[np.ndarray], np.ndarray]) -> float:
    """``nu(h)``, reduced with ``math.fsum`` so the result is order-independent."""
    parts = []
    for pts, w in nu.blocks():
        try:
            vals = np.asarray(h(pts), dtype=float)
        except Exception as exc:
            raise EvaluationError(f"h failed on support block: {exc}", point=pts[0]) from exc
        vals = np.broadcast_to(vals, w.shape)
        bad = ~np.isfinite(vals) & (w != 0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise EvaluationError(f"h is not finite at {pts[i]!r}", point=pts[i])
        parts.append(block_sum(w * vals, nu.compensated))
    return math.fsum(parts) / nu.scale


def normalize_density(raw: Callable[[np.ndarray], np.ndarray], quad: QuadratureRule) -> AbsContinuous:
    """Scale a positive function to unit mass under ``quad``."""
    z = 0.0
    for nodes, w in quad.chunks():
        vals = raw(nodes)
        bad = ~(vals > 0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NonPositiveDensityError(nodes[i], vals[i])
        z += float(np.sum(w * vals))

    def rho_bar(x):
        return raw(x) / z

    return AbsContinuous(rho_bar, quad)


def lebesgue(quad: QuadratureRule) -> AbsContinuous:
    vol = quad.volume

    def rho_bar(x):
        return np.full(x.shape[0], 1.0 / vol)

    return AbsContinuous(rho_bar, quad)


def birkhoff_empirical(system: DiscreteSystem, x0=None, burn_in: int = 1000,
                       samples: int = 100_000, seed: int = 0) -> Empirical:
    """Iterate ``T`` for ``burn_in + samples`` steps and keep the whole orbit.

    Systems that lose information under floating-point iteration supply an
    ``orbit_sampler``; the baker maps use it to refill the low-order bit
    that doubling shifts out, so the orbit keeps shadowing a true orbit
    instead of collapsing to ``x = 0`` after ~53 steps.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    rng = np.random.default_rng(seed)
    if x0 is None:
        x = rng.random(system.dim)
    else:
        x = np.asarray(x0, dtype=float).reshape(system.dim).copy()
    total = burn_in + samples
    if system.orbit_sampler is not None:
        return Empirical(system.orbit_sampler(x, total, rng), burn_in)
    orbit = np.empty((total, system.dim))
    orbit[0] = x
    for k in range(1, total):
        x = system.forward(x.reshape(1, -1))[0]
        orbit[k] = x
    return Empirical(orbit, burn_in)
