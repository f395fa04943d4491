"""pendlink: deterministic simulator of an IR audio link on a PD-stabilized pendulum."""

__version__ = "0.1.0"

from .actuator import MotorParams, applied_force, duty_to_voltage, force_to_duty
from .controller import (ControllerState, PdGains, closed_loop_poles,
                         closed_loop_tf, control_step, damping_ratio,
                         is_stable, is_underdamped, stability_region)
from .dynamics import (PendulumParams, PendulumState, angular_acceleration,
                       linearize, natural_poles, step, total_energy)
from .errors import (ConfigError, InvalidDesignError, InvalidInputError,
                     MetricUndefinedError, NumericFailureError, PendlinkError)
from .scenario import (AudioReport, AudioThresholds, ScenarioConfig,
                       ScenarioResult, StabilityReport, StabilityThresholds,
                       VibrationProfile, base_coupling, classify_audio,
                       classify_stability, link_test, run_scenario,
                       stability_sweep)
from .signal_chain import (AmplifierSpec, ChannelSpec, DigitalFilter,
                           FilterDesign, NoiseSpec, Signal, TransistorModel,
                           am_modulate, channel_transmit, design_bandpass,
                           discretize, filter_apply, frequency_response,
                           group_delay, led_drive_resistor,
                           led_drive_transistor, power_amp, preamp_gain,
                           rc_design_rule, read_wav, sine, thd, tone_mix,
                           write_wav)
from .tf import TransferFunction
