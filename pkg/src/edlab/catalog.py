"""Systems with closed-form ground truth.

* ``circle{omega}``: the thermostatted circle flow ``v(x) = -sin x + omega``
  on [-pi, pi), with reversal ``R(x) = pi - x``.
* ``baker{a}``: ``T(x, y) = (2x, a y)`` for ``x < 1/2`` and
  ``(2x - 1, a y + 1/2)`` otherwise.  ``a = 1/2`` is the area-preserving
  baker's transformation; smaller ``a`` contracts area by ``2a`` per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynsys import Circle, ContinuousSystem, DiscreteSystem, UnitSquare
from .errors import DegenerateOmegaError
from .measures import Atomic, AbsContinuous, atomic, normalize_density
from .transport import QuadratureRule

__all__ = [
    "CircleFlowSpec",
    "BakerSpec",
    "SYSTEMS",
    "make_circle_flow",
    "circle_fixed_points",
    "circle_K_closed_form",
    "circle_stationary",
    "make_baker",
    "make_system",
]

_CIRCLE = Circle()
_WRAP = _CIRCLE.wrap
_LOW_BIT = 2.0 ** -53

SYSTEMS = {
    "circle": "thermostatted circle flow v(x) = -sin x + omega on [-pi, pi); parameter omega",
    "baker": "baker map on [0,1)^2 with vertical contraction a in (0, 1/2]; a = 1/2 preserves area",
}


@dataclass(frozen=True)
class CircleFlowSpec:
    omega: float


@dataclass(frozen=True)
class BakerSpec:
    a: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.a <= 0.5:
            raise ValueError(f"baker contraction must lie in (0, 1/2], got {self.a!r}")


def make_circle_flow(omega: float) -> ContinuousSystem:
    omega = float(omega)

    def v(x):
        return omega - np.sin(x)

    def div(x):
        return -np.cos(x[..., 0])

    def reversal(x):
        return _WRAP(math.pi - np.asarray(x, dtype=float))

    return ContinuousSystem(
        dim=1,
        vector_field=v,
        divergence=div,
        domain=_CIRCLE,
        reversal=reversal,
        name=f"circle{{omega={omega!r}}}",
        params={"omega": omega},
    )


def circle_fixed_points(omega: float) -> Optional[tuple[float, float]]:
    """``(x_plus, x_minus)`` with x_plus attracting; None when ``|omega| > 1``."""
    if abs(omega) > 1.0:
        return None
    if abs(omega) == 1.0:
        x = math.copysign(math.pi / 2.0, omega)
        return x, x
    xp = math.asin(omega)
    xm = float(_WRAP(math.pi - xp))
    return xp, xm


def circle_K_closed_form(omega: float) -> float:
    if abs(omega) >= 1.0:
        return 0.0
    return math.sqrt(1.0 - omega * omega)


def circle_stationary(omega: float, quad: Optional[QuadratureRule] = None,
                      backward: bool = False) -> Atomic | AbsContinuous:
    """The stationary measure the circle flow selects.

    ``|omega| < 1``: a point mass at x_plus (or x_minus with ``backward``).
    ``|omega| > 1``: the density proportional to ``1 / |v|``.
    """
    if abs(omega) == 1.0:
        raise DegenerateOmegaError("circle flow is degenerate at |omega| = 1")
    if abs(omega) < 1.0:
        xp, xm = circle_fixed_points(omega)
        return atomic([xm if backward else xp], [1.0], make_circle_flow(omega))
    quad = quad or QuadratureRule.circle()

    def raw(x):
        return 1.0 / np.abs(omega - np.sin(x[..., 0]))

    return normalize_density(raw, quad)


# ---------------------------------------------------------------------------
# Baker family
# ---------------------------------------------------------------------------


def make_baker(spec: BakerSpec | float = BakerSpec()) -> DiscreteSystem:
    if not isinstance(spec, BakerSpec):
        spec = BakerSpec(float(spec))
    a = spec.a
    log_jac = -math.log(2.0 * a) + 0.0  # no -0.0 at a = 1/2
    top = 0.5 + a

    def forward(p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        y = p[..., 1]
        right = x >= 0.5
        out = np.empty_like(p)
        out[..., 0] = np.where(right, 2.0 * x - 1.0, 2.0 * x)
        out[..., 1] = np.where(right, a * y + 0.5, a * y)
        return out

    def inverse(p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        y = p[..., 1]
        upper = y >= 0.5
        out = np.empty_like(p)
        out[..., 0] = 0.5 * (x + upper)
        out[..., 1] = (y - 0.5 * upper) / a
        # Off the image strips [0, a) and [1/2, 1/2 + a) there is no preimage.
        undefined = (y >= a) & ~(upper & (y < top))
        if undefined.any():
            out[undefined] = np.nan
        return out

    def log_jac_inv(p):
        p = np.asarray(p, dtype=float)
        return np.full(p.shape[:-1], log_jac)

    def sampler(x0, steps, rng):
        # x is held on the 2^-53 grid; each doubling shifts out the top bit and
        # a fresh random bit is shifted in at the bottom, as for a typical
        # real orbit whose digits are unknown beyond double precision.
        bits = rng.integers(0, 2, size=steps).tolist()
        x = math.floor(float(x0[0]) / _LOW_BIT) * _LOW_BIT
        y = float(x0[1])
        orbit = np.empty((steps, 2))
        orbit[0] = (x, y)
        for k in range(1, steps):
            if x >= 0.5:
                x = 2.0 * x - 1.0
                y = a * y + 0.5
            else:
                x = 2.0 * x
                y = a * y
            x += bits[k] * _LOW_BIT
            orbit[k, 0] = x
            orbit[k, 1] = y
        return orbit

    return DiscreteSystem(
        dim=2,
        forward=forward,
        inverse=inverse,
        log_jac_inv=log_jac_inv,
        domain=UnitSquare(),
        name=f"baker{{a={a!r}}}",
        params={"a": a},
        volume_preserving=(a == 0.5),
        orbit_sampler=sampler,
    )


def make_system(kind: str, omega: float | None = None, a: float | None = None):
    """Construct a catalog system by harness name."""
    if kind == "circle":
        if omega is None:
            raise ValueError("circle system needs omega")
        return make_circle_flow(omega)
    if kind == "baker":
        return make_baker(BakerSpec(0.5 if a is None else a))
    raise ValueError(f"unknown system {kind!r}; known: {', '.join(SYSTEMS)}")
