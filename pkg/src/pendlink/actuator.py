"""PWM H-bridge drive model: force command -> signed duty -> bridge voltage.

The averaged model V_out = V_ref * duty is used; PWM ripple is not simulated
because the control period is far longer than the PWM period on the real
bridge. Saturation is a hard clamp at +/-max_duty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError


@dataclass(frozen=True)
class MotorParams:
    v_ref: float                 # bridge supply voltage, V
    force_per_volt: float        # actuator gain, N/V
    max_duty: float = 1.0        # duty magnitude cap
    deadband: float = 0.0        # |duty| below this produces no motion

    def __post_init__(self):
        if not (self.v_ref > 0 and self.force_per_volt > 0):
            raise InvalidInputError("v_ref and force_per_volt must be positive")
        if not (0 < self.max_duty <= 1):
            raise InvalidInputError("max_duty must be in (0, 1]")
        if not (0 <= self.deadband < self.max_duty):
            raise InvalidInputError("deadband must be in [0, max_duty)")

    @property
    def max_force(self) -> float:
        """Largest force magnitude the bridge can command."""
        return self.v_ref * self.force_per_volt * self.max_duty


def duty_to_voltage(duty: float, v_ref: float) -> float:
    """V_out = V_ref * duty; sign encodes bridge direction."""
    if not math.isfinite(duty) or abs(duty) > 1:
        raise InvalidInputError(f"|duty| must be <= 1, got {duty}")
    return v_ref * duty


def force_to_duty(force: float, mp: MotorParams) -> float:
    """Invert the linear drive map and clamp to +/-max_duty."""
    if not math.isfinite(force):
        raise InvalidInputError("force must be finite")
    duty = force / (mp.force_per_volt * mp.v_ref)
    return max(-mp.max_duty, min(mp.max_duty, duty))


def applied_force(duty: float, mp: MotorParams) -> float:
    """Force actually delivered for a commanded duty.

    Duty magnitudes inside the deadband move nothing and map to zero force.
    """
    if abs(duty) < mp.deadband:
        return 0.0
    return duty_to_voltage(duty, mp.v_ref) * mp.force_per_volt
