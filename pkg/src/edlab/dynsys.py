"""Phase spaces, flows and invertible maps.

Points are plain numpy arrays whose trailing axis holds the coordinates.
For one-dimensional systems the trailing axis may be dropped, so a float
or an ``(N,)`` array is read as one or ``N`` points on the circle.  Every
public routine returns arrays shaped like its input.

Flows are advanced with classical fixed-step RK4.  Backward orbits carry
the log-Jacobian of ``T_{-t}`` as an extra scalar state integrated on the
same step grid as the orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    IntegrationBudgetError,
    MissingReversalError,
    NumericalOverflowError,
    PreimageUndefinedError,
)

__all__ = [
    "Circle",
    "UnitSquare",
    "ContinuousSystem",
    "DiscreteSystem",
    "IntegratorConfig",
    "advance",
    "backward_orbit_with_log_jacobian",
    "backward_orbits",
    "forward_orbits_with_contraction",
    "map_backward_orbit",
    "map_backward_orbits",
    "map_forward",
    "check_reversal",
]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    """The circle [-pi, pi) with periodic wrap."""

    dim: int = 1
    volume: float = TWO_PI
    name: str = "circle"

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return np.mod(x + math.pi, TWO_PI) - math.pi

    def distance(self, a, b) -> np.ndarray:
        d = np.abs(self.wrap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
        return d[..., 0] if d.ndim and d.shape[-1] == 1 else d

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= -math.pi) & (x < math.pi)))


@dataclass(frozen=True)
class UnitSquare:
    """The square [0, 1)^2; ``periodic`` selects which axes wrap."""

    periodic: tuple[bool, bool] = (True, True)
    dim: int = 2
    volume: float = 1.0
    name: str = "unit-square"

    def wrap(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float, copy=True)
        for axis, wraps in enumerate(self.periodic):
            if wraps:
                x[..., axis] = np.mod(x[..., axis], 1.0)
        return x

    def distance(self, a, b) -> np.ndarray:
        d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        for axis, wraps in enumerate(self.periodic):
            if wraps:
                d[..., axis] = np.minimum(d[..., axis], 1.0 - d[..., axis])
        return np.sqrt(np.sum(d * d, axis=-1))

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= 0.0) & (x < 1.0)))


Domain = Circle | UnitSquare


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

Field = Callable[[np.ndarray], np.ndarray]
Scalar = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ContinuousSystem:
    """A flow ``dx/dt = v(x)``.

    ``vector_field`` maps ``(n, dim)`` arrays to ``(n, dim)``;
    ``divergence`` maps ``(n, dim)`` to ``(n,)``.
    """

    dim: int
    vector_field: Field
    divergence: Scalar
    domain: Domain
    reversal: Optional[Field] = None
    name: str = "flow"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DiscreteSystem:
    """An invertible map with a partial inverse.

    ``inverse`` returns NaN rows where the preimage is undefined.
    ``log_jac_inv`` is ``log |det D T^{-1}(x)|``.
    ``orbit_sampler(x0, steps, rng)`` optionally replaces naive iteration
    for long orbits when finite-precision forward steps lose information
    (see :func:`edlab.measures.birkhoff_empirical`).
    """

    dim: int
    forward: Field
    inverse: Field
    log_jac_inv: Scalar
    domain: Domain
    name: str = "map"
    params: dict = field(default_factory=dict)
    volume_preserving: bool = False
    orbit_sampler: Optional[Callable[[np.ndarray, int, np.random.Generator], np.ndarray]] = None


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-3
    max_substeps: int = 10_000_000
    fixed_point_tol: float = 1e-14

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"integrator step must be positive, got {self.h!r}")
        if self.max_substeps < 1:
            raise ValueError("max_substeps must be >= 1")

    def steps_for(self, span: float) -> int:
        if span == 0:
            return 0
        # Tiny slack so t = k*h does not round up to k+1 steps.
        n = max(1, math.ceil(abs(span) / self.h - 1e-9))
        if n > self.max_substeps:
            raise IntegrationBudgetError(
                f"span {span!r} needs {n} steps at h={self.h}, limit {self.max_substeps}"
            )
        return n


DEFAULT_CONFIG = IntegratorConfig()


# ---------------------------------------------------------------------------
# Shape helpers
# ---------------------------------------------------------------------------


def _as_batch(x, dim: int) -> tuple[np.ndarray, tuple[int, ...]]:
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        return arr.reshape(-1, 1), arr.shape
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise ValueError(f"expected trailing axis of length {dim}, got shape {arr.shape}")
    return arr.reshape(-1, dim), arr.shape


def _restore(points: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return points.reshape(shape)


def _scalar_shape(shape: tuple[int, ...], dim: int) -> tuple[int, ...]:
    if dim == 1:
        if len(shape) > 1 and shape[-1] == 1:
            return shape[:-1]
        return shape
    return shape[:-1]


# ---------------------------------------------------------------------------
# RK4 core
# ---------------------------------------------------------------------------


def _rk4_segment(v, g, x, l, span, cfg, wrap):
    """Advance ``(x, l)`` over ``span`` with ``dx = v(x)``, ``dl = g(x)``.

    Stage arithmetic uses unwrapped coordinates; wrap applies to step output.
    """
    n = cfg.steps_for(span)
    if n == 0:
        return x, l
    dt = span / n
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n):
        k1 = v(x)
        q1 = g(x)
        x2 = x + half * k1
        k2 = v(x2)
        q2 = g(x2)
        x3 = x + half * k2
        k3 = v(x3)
        q3 = g(x3)
        x4 = x + dt * k3
        k4 = v(x4)
        q4 = g(x4)
        x = wrap(x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        l = l + sixth * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        if (i & 63 == 63 or i == n - 1) and not (np.isfinite(x).all() and np.isfinite(l).all()):
            raise NumericalOverflowError("non-finite state during RK4 integration")
    return x, l


def _integrate(system: ContinuousSystem, x: np.ndarray, spans: Sequence[float],
               cfg: IntegratorConfig, direction: float, accumulate: Scalar | None):
    """Integrate a batch through successive non-negative ``spans``.

    ``direction`` is +1 (forward) or -1 (backward).  Returns the list of
    ``(points, accumulator)`` after each span.  Points sitting on a fixed
    point (``|v| < tol``) stay put and the accumulator grows linearly.
    """
    v_raw = system.vector_field
    if direction > 0:
        v = v_raw
    else:
        def v(p):
            return -v_raw(p)

    if accumulate is None:
        def g(p):
            return 0.0
    else:
        g = accumulate

    speed = np.sqrt(np.sum(v_raw(x) ** 2, axis=-1))
    fixed = speed < cfg.fixed_point_tol
    moving = ~fixed
    x_fix = x[fixed]
    g_fix = g(x_fix) if fixed.any() else 0.0
    x_mov = x[moving]
    l_mov = np.zeros(x_mov.shape[0])
    l_fix = np.zeros(x_fix.shape[0])

    out = []
    for span in spans:
        if span < 0:
            raise ValueError("spans must be non-negative")
        if x_mov.shape[0]:
            x_mov, l_mov = _rk4_segment(v, g, x_mov, l_mov, span, cfg, system.domain.wrap)
        l_fix = l_fix + span * g_fix
        pts = np.empty_like(x)
        acc = np.empty(x.shape[0])
        pts[fixed] = x_fix
        pts[moving] = x_mov
        acc[fixed] = l_fix
        acc[moving] = l_mov
        out.append((pts, acc))
    return out


def _spans(times: Sequence[float]) -> list[float]:
    prev = 0.0
    spans = []
    for t in times:
        if t < prev:
            raise ValueError("times must be non-negative and non-decreasing")
        spans.append(t - prev)
        prev = t
    return spans


# ---------------------------------------------------------------------------
# Flow operations
# ---------------------------------------------------------------------------


def advance(system: ContinuousSystem, x, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Return ``T_t x``; negative ``t`` integrates the reversed field."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    pts, shape = _as_batch(x, system.dim)
    if t == 0:
        return _restore(pts.copy(), shape)
    direction = 1.0 if t > 0 else -1.0
    (out, _), = _integrate(system, pts, [abs(t)], cfg, direction, None)
    return _restore(out, shape)


def backward_orbit_with_log_jacobian(system: ContinuousSystem, x, t: float,
                                     cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Return ``(T_{-t} x, log J(x, t))`` with ``log J = -int_0^t div v(T_{-s}x) ds``."""
    if t < 0:
        raise ValueError("backward orbit needs t >= 0")
    (pts, logj), = backward_orbits(system, x, [t], cfg)
    return pts, logj


def backward_orbits(system: ContinuousSystem, x, times: Sequence[float],
                    cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Checkpointed backward orbits: one ``(T_{-t}x, log J(x,t))`` per time.

    Uses the cocycle ``log J(x, t2) = log J(x, t1) + log J(T_{-t1}x, t2 - t1)``
    so a whole series costs a single integration.
    """
    pts, shape = _as_batch(x, system.dim)
    div = system.divergence

    def neg_div(p):
        return -div(p)

    results = _integrate(system, pts, _spans(times), cfg, -1.0, neg_div)
    sshape = _scalar_shape(shape, system.dim)
    return [(_restore(p, shape), a.reshape(sshape)) for p, a in results]


def forward_orbits_with_contraction(system: ContinuousSystem, x, times: Sequence[float],
                                    cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Checkpointed forward orbits with ``Lambda(x,t) = int_0^t div v(T_s x) ds``."""
    pts, shape = _as_batch(x, system.dim)
    results = _integrate(system, pts, _spans(times), cfg, 1.0, system.divergence)
    sshape = _scalar_shape(shape, system.dim)
    return [(_restore(p, shape), a.reshape(sshape)) for p, a in results]


def check_reversal(system: ContinuousSystem, x, t: float,
                   cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Domain distance between ``R(T_t x)`` and ``T_{-t}(R x)``."""
    if system.reversal is None:
        raise MissingReversalError(f"system {system.name!r} has no reversal involution")
    pts, shape = _as_batch(x, system.dim)
    R = system.reversal
    lhs = R(advance(system, pts, t, cfg))
    rhs = advance(system, R(pts), -t, cfg)
    res = system.domain.distance(lhs, rhs)
    return res.reshape(_scalar_shape(shape, system.dim))


# ---------------------------------------------------------------------------
# Map operations
# ---------------------------------------------------------------------------


def map_forward(system: DiscreteSystem, x, n: int):
    if n < 0:
        raise ValueError("n must be >= 0")
    pts, shape = _as_batch(x, system.dim)
    for _ in range(n):
        pts = system.forward(pts)
    return _restore(pts, shape)


def map_backward_orbits(system: DiscreteSystem, x, horizons: Sequence[int]):
    """Checkpointed ``(T^{-n}x, sum_k log_jac_inv(T^{-k}x))`` per horizon."""
    pts, shape = _as_batch(x, system.dim)
    logj = np.zeros(pts.shape[0])
    sshape = _scalar_shape(shape, system.dim)
    step = 0
    out = []
    for n in horizons:
        if n < step:
            raise ValueError("horizons must be non-negative and non-decreasing")
        while step < n:
            logj = logj + system.log_jac_inv(pts)
            prev = system.inverse(pts)
            bad = ~np.all(np.isfinite(prev), axis=-1)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise PreimageUndefinedError(step, tuple(pts[i]))
            pts = prev
            step += 1
        out.append((_restore(pts, shape), logj.reshape(sshape)))
    return out


def map_backward_orbit(system: DiscreteSystem, x, n: int):
    """Return ``(T^{-n}x, log J(x, n))``; ``log J`` sums ``log_jac_inv`` along the way."""
    if n < 0:
        raise ValueError("n must be >= 0")
    (pts, logj), = map_backward_orbits(system, x, [n])
    return pts, logj
