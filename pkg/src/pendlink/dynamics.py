"""Nonlinear single-rod pendulum plant.

A uniform rod of mass m and length l pivots at one end. The motor applies a
tangential force F at moment arm l1; gravity acts at moment arm l2 (l/2 for a
uniform rod). Angular momentum balance about the pivot gives

    (m l^2 / 3) * d(omega)/dt = F*l1 - m*g*l2*sin(theta) - c_damp*omega

i.e. a gravity-restoring (hanging-equivalent) rod. ``invert_gravity`` flips the
gravity torque sign for a true balance-point experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericFailureError
from .tf import TransferFunction

MAX_ACCURATE_DT = 0.01  # s; RK4 accuracy bound documented for step()


@dataclass(frozen=True)
class PendulumParams:
    """Plant constants. l2 defaults to l/2 (uniform rod center of mass)."""

    m: float            # mass, kg
    l: float            # rod length, m
    l1: float           # actuation moment arm, m
    g: float = 9.8      # gravitational acceleration, m/s^2
    l2: float = None    # gravity moment arm, m; None -> l/2
    c_damp: float = 0.0          # viscous damping, N*m*s/rad
    invert_gravity: bool = False  # True flips gravity torque (destabilizing)

    def __post_init__(self):
        if self.l2 is None:
            object.__setattr__(self, "l2", self.l / 2.0)
        if not (self.m > 0 and self.l > 0 and self.g > 0):
            raise InvalidInputError("m, l, g must be positive")
        if not (0 < self.l1 <= self.l):
            raise InvalidInputError("l1 must satisfy 0 < l1 <= l")
        if not (self.l2 > 0):
            raise InvalidInputError("l2 must be positive")
        if self.c_damp < 0:
            raise InvalidInputError("c_damp must be >= 0")

    @property
    def inertia(self) -> float:
        """Moment of inertia of the rod about the pivot, m*l^2/3."""
        return self.m * self.l * self.l / 3.0

    @property
    def gravity_sign(self) -> float:
        return 1.0 if self.invert_gravity else -1.0


@dataclass(frozen=True)
class PendulumState:
    theta: float        # angle from vertical, rad, CCW positive
    omega: float        # angular velocity, rad/s
    t: float = 0.0      # simulation time, s

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.omega)
                and math.isfinite(self.t)):
            raise InvalidInputError("state fields must be finite")


def acceleration(params: PendulumParams, theta: float, omega: float, force: float,
                 g_eff: float = None, horiz_accel: float = 0.0) -> float:
    """Angular acceleration with optional base-motion terms.

    g_eff overrides gravity (vertical base acceleration); horiz_accel is an
    in-plane pivot acceleration adding torque m*a_h*(l/2)*cos(theta).
    """
    g = params.g if g_eff is None else g_eff
    torque = (force * params.l1
              + params.gravity_sign * params.m * g * params.l2 * math.sin(theta)
              + params.m * horiz_accel * (params.l / 2.0) * math.cos(theta)
              - params.c_damp * omega)
    return torque / params.inertia


def angular_acceleration(params: PendulumParams, state: PendulumState,
                         force: float) -> float:
    """beta = 3*(F*l1 - m*g*l2*sin(theta) - c_damp*omega) / (m*l^2)."""
    if not math.isfinite(force):
        raise InvalidInputError("force must be finite")
    return acceleration(params, state.theta, state.omega, force)


def step(params: PendulumParams, state: PendulumState, force: float,
         dt: float) -> PendulumState:
    """One classical RK4 step with the force held constant over dt.

    Accuracy is documented for dt <= MAX_ACCURATE_DT; larger steps are legal
    but degrade the integration error bound.
    """
    if not (dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if not math.isfinite(force):
        raise InvalidInputError("force must be finite")

    th, om = state.theta, state.omega

    k1t = om
    k1o = acceleration(params, th, om, force)
    k2t = om + 0.5 * dt * k1o
    k2o = acceleration(params, th + 0.5 * dt * k1t, om + 0.5 * dt * k1o, force)
    k3t = om + 0.5 * dt * k2o
    k3o = acceleration(params, th + 0.5 * dt * k2t, om + 0.5 * dt * k2o, force)
    k4t = om + dt * k3o
    k4o = acceleration(params, th + dt * k3t, om + dt * k3o, force)

    theta = th + (dt / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    omega = om + (dt / 6.0) * (k1o + 2.0 * k2o + 2.0 * k3o + k4o)

    if not (math.isfinite(theta) and math.isfinite(omega)):
        raise NumericFailureError(
            f"pendulum state diverged at t={state.t + dt:.6f}s "
            f"(theta={theta}, omega={omega})")
    return PendulumState(theta, omega, state.t + dt)


def linearize(params: PendulumParams) -> TransferFunction:
    """Small-angle plant Theta(s)/F(s) = l1 / ((m l^2/3) s^2 + c_damp s + m g l2)."""
    return TransferFunction(
        (params.l1,),
        (params.inertia, params.c_damp,
         -params.gravity_sign * params.m * params.g * params.l2),
    )


def natural_poles(params: PendulumParams):
    """Open-loop pole pair of the linearized plant.

    For the undamped restoring rod this is the exact conjugate pair
    +/- j*sqrt(3g/(2l)) on the imaginary axis; any other case falls back to a
    numeric root solve of the linearized denominator.
    """
    if params.c_damp == 0.0 and not params.invert_gravity and params.l2 == params.l / 2.0:
        w = math.sqrt(3.0 * params.g / (2.0 * params.l))
        return (complex(0.0, w), complex(0.0, -w))
    roots = np.roots(linearize(params).den)
    order = np.argsort(-roots.imag)
    return (complex(roots[order[0]]), complex(roots[order[1]]))


def total_energy(params: PendulumParams, state: PendulumState) -> float:
    """E = (1/6) m l^2 omega^2 + sign * m g l2 cos(theta); conserved when
    c_damp = 0 and no force acts."""
    kinetic = 0.5 * params.inertia * state.omega * state.omega
    potential = params.gravity_sign * params.m * params.g * params.l2 \
        * math.cos(state.theta)
    return kinetic + potential
