"""Discrete PD regulator and closed-loop pole/stability analysis.

The control law follows the rig's loop: sample the angle, form the error
against the set angle, difference the measurement for the rate term, and
scale the output down by a fixed divisor:

    F = -(kp * (measured - set_angle) + kd * (measured - last) / dt) / output_scale

``literal_pseudocode`` switches to the verbatim controller, whose
"proportional" term uses the one-sample angle increment instead of the
setpoint error (no setpoint tracking; kept for fidelity experiments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import PendulumParams
from .errors import InvalidInputError, NumericFailureError
from .tf import TransferFunction


@dataclass(frozen=True)
class PdGains:
    kp: float   # N per rad (torque per rad through the l1 arm)
    kd: float   # N*s per rad

    def __post_init__(self):
        if not (math.isfinite(self.kp) and math.isfinite(self.kd)):
            raise InvalidInputError("gains must be finite")


@dataclass(frozen=True)
class ControllerState:
    """Per-loop controller memory; carry one instance per control loop."""

    set_angle: float                    # rad
    dt: float                           # control period, s
    last_angle: float = None            # rad; None until the first sample
    output_scale: float = 10.0          # the literal /10 from the rig firmware
    literal_pseudocode: bool = False

    def __post_init__(self):
        if not (self.dt > 0):
            raise InvalidInputError("control period dt must be positive")
        if not (self.output_scale > 0):
            raise InvalidInputError("output_scale must be positive")


def control_step(gains: PdGains, cstate: ControllerState,
                 measured_angle: float):
    """One control tick: returns (force command [N], updated ControllerState).

    The first call seeds last_angle with the measurement, so the rate term
    starts at zero.
    """
    if not math.isfinite(measured_angle):
        raise NumericFailureError("measured angle is not finite")

    if cstate.last_angle is None:
        d_angle = 0.0
    else:
        d_angle = measured_angle - cstate.last_angle
    rate = d_angle / cstate.dt

    if cstate.literal_pseudocode:
        force = -gains.kp * d_angle - (gains.kd * rate) / cstate.output_scale
    else:
        error = measured_angle - cstate.set_angle
        force = -(gains.kp * error + gains.kd * rate) / cstate.output_scale

    return force, replace(cstate, last_angle=measured_angle)


def closed_loop_tf(params: PendulumParams, gains: PdGains) -> TransferFunction:
    """H(s) = l1 / ((m l^2/3) s^2 + (K_d + c_damp) s + K_p + m g l2)."""
    return TransferFunction(
        (params.l1,),
        (params.inertia,
         gains.kd + params.c_damp,
         gains.kp - params.gravity_sign * params.m * params.g * params.l2),
    )


def closed_loop_poles(params: PendulumParams, gains: PdGains):
    """Both closed-loop poles via a numeric root solve, as a 2-tuple.

    Ordered by descending imaginary part, then descending real part.
    """
    roots = np.roots(closed_loop_tf(params, gains).den)
    a, b = sorted(roots, key=lambda r: (-r.imag, -r.real))
    return (complex(a), complex(b))


def _discriminant(params: PendulumParams, gains: PdGains) -> float:
    den = closed_loop_tf(params, gains).den
    return den[1] * den[1] - 4.0 * den[0] * den[2]


def is_underdamped(params: PendulumParams, gains: PdGains) -> bool:
    """True iff K_d > 0 and the closed-loop discriminant is negative
    (complex pole pair). At c_damp = 0, l2 = l/2 this is exactly
    K_d^2 - (4 m l^2 / 3)(K_p + m g l / 2) < 0 together with K_d > 0."""
    return gains.kd > 0 and _discriminant(params, gains) < 0


def is_stable(params: PendulumParams, gains: PdGains) -> bool:
    """Routh-Hurwitz for degree 2: every denominator coefficient strictly
    positive, equivalent to both poles strictly in the left half-plane."""
    den = closed_loop_tf(params, gains).den
    return den[1] > 0 and den[2] > 0


def damping_ratio(params: PendulumParams, gains: PdGains) -> float:
    """zeta = (K_d + c_damp) / (2 sqrt((m l^2/3)(K_p + m g l2)));
    defined only when the stiffness term is positive."""
    den = closed_loop_tf(params, gains).den
    if den[2] <= 0:
        raise InvalidInputError("damping ratio undefined: non-positive stiffness")
    return den[1] / (2.0 * math.sqrt(den[0] * den[2]))


def stability_region(params: PendulumParams, kp_range, kd_range, grid_n: int):
    """is_stable over a grid_n x grid_n grid.

    Returns (kp_axis, kd_axis, grid) with grid[i][j] = is_stable at
    (kp_axis[i], kd_axis[j]), row-major.
    """
    if grid_n < 2:
        raise InvalidInputError("grid_n must be >= 2")
    kp_lo, kp_hi = float(kp_range[0]), float(kp_range[1])
    kd_lo, kd_hi = float(kd_range[0]), float(kd_range[1])
    if not all(map(math.isfinite, (kp_lo, kp_hi, kd_lo, kd_hi))):
        raise InvalidInputError("gain ranges must be finite")
    if not (kp_hi > kp_lo) or not (kd_hi > kd_lo):
        raise InvalidInputError("gain ranges must be non-empty")

    kp_axis = np.linspace(kp_lo, kp_hi, grid_n)
    kd_axis = np.linspace(kd_lo, kd_hi, grid_n)
    grid = np.empty((grid_n, grid_n), dtype=bool)
    for i, kp in enumerate(kp_axis):
        for j, kd in enumerate(kd_axis):
            grid[i, j] = is_stable(params, PdGains(kp, kd))
    return kp_axis, kd_axis, grid
