"""Full experiment runner: base vibration -> pendulum -> beam pointing -> link.

One scenario couples the stages per control tick (measure angle, PD step,
duty/saturation, RK4 plant step under base-motion disturbances) and per audio
sample (preamp -> resistor LED bias -> optical channel at the beam's current
misalignment -> Table-1 band-pass -> power amp). Outcomes are classified into
the qualitative categories the rig experiments report.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import actuator, signal_chain
from .actuator import MotorParams
from .controller import ControllerState, PdGains, control_step
from .dynamics import PendulumParams, acceleration
from .errors import InvalidInputError, MetricUndefinedError
from .signal_chain import (AmplifierSpec, ChannelSpec, FilterDesign, Signal,
                           channel_transmit, design_bandpass, discretize,
                           filter_apply, led_drive_resistor, power_amp,
                           preamp_gain)

VIBRATION_KINDS = ("none", "vertical", "longitudinal", "lateral")


@dataclass(frozen=True)
class VibrationProfile:
    """Base-motion excitation, one of the test-bench rows."""

    kind: str = "none"
    amplitude: float = 0.0   # m/s^2 peak
    frequency: float = 0.0   # Hz

    def __post_init__(self):
        if self.kind not in VIBRATION_KINDS:
            raise InvalidInputError(f"unknown vibration kind {self.kind!r}")
        if self.amplitude < 0:
            raise InvalidInputError("amplitude must be >= 0")
        if self.kind != "none" and not (self.frequency > 0):
            raise InvalidInputError("frequency must be positive for vibration")


def base_coupling(profile: VibrationProfile, t, g: float):
    """Disturbance triple (g_eff, horizontal_accel, lateral_pointing) at time t.

    vertical shakes gravity itself; longitudinal is an in-plane pivot
    acceleration (torque m*a*(l/2)*cos theta downstream); lateral is an
    out-of-plane pointing error atan2(a sin wt, g) that the one-axis pendulum
    cannot reject. Accepts scalar or array t.
    """
    t = np.asarray(t, dtype=np.float64)
    zero = np.zeros_like(t)
    if profile.kind == "none" or profile.amplitude == 0.0:
        out = (g + zero, zero, zero)
    else:
        wave = profile.amplitude * np.sin(2 * np.pi * profile.frequency * t)
        if profile.kind == "vertical":
            out = (g + wave, zero, zero)
        elif profile.kind == "longitudinal":
            out = (g + zero, wave, zero)
        else:  # lateral
            out = (g + zero, zero, np.arctan2(wave, g))
    if t.ndim == 0:
        return tuple(float(v) for v in out)
    return out


# ---------------------------------------------------------------------------
# Reports and thresholds
# ---------------------------------------------------------------------------

STABLE = "stable"
SMALL_OSCILLATION = "small_oscillation"
LARGE_OSCILLATION = "large_oscillation"

COMPLETE = "complete"
COMPLETE_WITH_NOISE = "complete_with_noise"
INTERMITTENT = "intermittent"
VANISH = "vanish"


@dataclass(frozen=True)
class StabilityThresholds:
    stable_pp: float = math.radians(1.0)   # peak-to-peak below this: stable
    small_pp: float = math.radians(8.0)    # below this: small oscillation
    window_fraction: float = 0.2           # settled-window share of the run
    min_window: float = 2.0                # s of settled time required


@dataclass(frozen=True)
class AudioThresholds:
    frame: float = 0.020          # s
    rx_floor: float = 0.0         # V RMS under which a frame is dead
    min_correlation: float = 0.5  # frame normalized cross-correlation
    dropout_complete: float = 0.02
    dropout_vanish: float = 0.60
    snr_complete_db: float = 20.0
    max_lag: float = 0.1          # s, delay-compensation search half-window


@dataclass(frozen=True)
class StabilityReport:
    set_angle: float                    # rad
    classification: str
    steady_angle: float = None          # rad, present iff stable
    oscillation_amplitude: float = 0.0  # rad, half peak-to-peak

    def __post_init__(self):
        if (self.steady_angle is not None) != (self.classification == STABLE):
            raise InvalidInputError("steady_angle present iff classification stable")


@dataclass(frozen=True)
class AudioReport:
    classification: str
    dropout_fraction: float
    mean_frame_correlation: float
    snr_db: float

    def __post_init__(self):
        if not (0.0 <= self.dropout_fraction <= 1.0):
            raise InvalidInputError("dropout_fraction out of range")
        if not (-1.0 <= self.mean_frame_correlation <= 1.0):
            raise InvalidInputError("mean_frame_correlation out of range")


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    pendulum: PendulumParams
    gains: PdGains
    motor: MotorParams
    controller_on: bool = True
    vibration: VibrationProfile = field(default_factory=VibrationProfile)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    bandpass: FilterDesign = field(default_factory=FilterDesign)
    preamp: AmplifierSpec = field(default_factory=lambda: AmplifierSpec(1e3, 1e3))
    led_supply: float = 5.0          # V1 of the resistor bias
    pa_gain: float = 5.0
    pa_clip: float = 4.0
    set_angle: float = 0.0           # rad
    theta0: float = 0.0              # rad; rigs never rest exactly at zero
    control_rate: float = 1000.0     # Hz
    audio_rate: float = 48000.0      # Hz
    duration: float = 12.0           # s
    seed: int = 0
    output_scale: float = 10.0
    literal_pseudocode: bool = False
    audio_source: Signal = None      # None skips the audio path entirely
    stability_thresholds: StabilityThresholds = field(
        default_factory=StabilityThresholds)
    audio_thresholds: AudioThresholds = None  # None: defaults + channel rx_floor

    def __post_init__(self):
        if not (self.duration > 0):
            raise InvalidInputError("duration must be positive")
        if not (0 < self.control_rate <= self.audio_rate):
            raise InvalidInputError("need 0 < control_rate <= audio_rate")
        ratio = self.audio_rate / self.control_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidInputError("audio_rate must be a multiple of control_rate")
        if self.audio_source is not None and \
                self.audio_source.sample_rate != self.audio_rate:
            raise InvalidInputError("audio source rate must equal audio_rate")

    def resolved_audio_thresholds(self) -> AudioThresholds:
        if self.audio_thresholds is not None:
            return self.audio_thresholds
        return AudioThresholds(rx_floor=self.channel.rx_floor)


@dataclass(frozen=True)
class ScenarioResult:
    t: np.ndarray        # control-rate timestamps, s
    theta: np.ndarray    # rad
    omega: np.ndarray    # rad/s
    duty: np.ndarray     # signed fraction
    tx: Signal = None    # LED drive voltage at audio rate
    rx: Signal = None    # receiver output at audio rate
    stability: StabilityReport = None
    audio: AudioReport = None
    aborted: bool = False


# ---------------------------------------------------------------------------
# Core run
# ---------------------------------------------------------------------------

def _rk4_tick(params, profile, theta, omega, force, t, dt):
    def accel(th, om, tt):
        g_eff, a_h, _ = base_coupling(profile, tt, params.g)
        return acceleration(params, th, om, force, g_eff, a_h)

    k1t = omega
    k1o = accel(theta, omega, t)
    k2t = omega + 0.5 * dt * k1o
    k2o = accel(theta + 0.5 * dt * k1t, omega + 0.5 * dt * k1o, t + 0.5 * dt)
    k3t = omega + 0.5 * dt * k2o
    k3o = accel(theta + 0.5 * dt * k2t, omega + 0.5 * dt * k2o, t + 0.5 * dt)
    k4t = omega + dt * k3o
    k4o = accel(theta + dt * k3t, omega + dt * k3o, t + dt)
    return (theta + (dt / 6.0) * (k1t + 2 * k2t + 2 * k3t + k4t),
            omega + (dt / 6.0) * (k1o + 2 * k2o + 2 * k3o + k4o))


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run one deterministic experiment; (config, seed) fixes every output."""
    p = config.pendulum
    dt = 1.0 / config.control_rate
    n = int(round(config.duration * config.control_rate))

    cstate = ControllerState(config.set_angle, dt,
                             output_scale=config.output_scale,
                             literal_pseudocode=config.literal_pseudocode)
    theta, omega = config.theta0, 0.0
    t_arr = np.empty(n)
    th_arr = np.empty(n)
    om_arr = np.empty(n)
    du_arr = np.empty(n)
    aborted = False
    ticks = 0

    for i in range(n):
        t = i * dt
        if config.controller_on:
            force_cmd, cstate = control_step(config.gains, cstate, theta)
            duty = actuator.force_to_duty(force_cmd, config.motor)
            force = actuator.applied_force(duty, config.motor)
        else:
            duty = 0.0
            force = 0.0
        t_arr[i] = t
        th_arr[i] = theta
        om_arr[i] = omega
        du_arr[i] = duty
        ticks = i + 1
        if abs(theta) > math.pi:
            aborted = True
            break
        theta, omega = _rk4_tick(p, config.vibration, theta, omega, force, t, dt)

    t_arr, th_arr = t_arr[:ticks], th_arr[:ticks]
    om_arr, du_arr = om_arr[:ticks], du_arr[:ticks]

    if aborted:
        half_pp = 0.5 * (th_arr.max() - th_arr.min()) if ticks else 0.0
        stability = StabilityReport(config.set_angle, LARGE_OSCILLATION,
                                    oscillation_amplitude=half_pp)
    else:
        stability = classify_stability(t_arr, th_arr, config.set_angle,
                                       config.stability_thresholds)

    tx = rx = audio = None
    if config.audio_source is not None:
        tx, rx = _run_audio_path(config, th_arr, n)
        # grade the link against the ideal-chain reference (perfect pointing,
        # noiseless channel) so static filter coloration is not counted as
        # link degradation
        audio = classify_audio(_ideal_reference(config), rx,
                               config.resolved_audio_thresholds())

    return ScenarioResult(t_arr, th_arr, om_arr, du_arr, tx, rx,
                          stability, audio, aborted)


def _fit_source(config: ScenarioConfig) -> Signal:
    """Tile/truncate the configured source to exactly the run duration."""
    n_audio = int(round(config.duration * config.audio_rate))
    src = config.audio_source.samples
    if src.size < n_audio:
        reps = int(np.ceil(n_audio / src.size))
        src = np.tile(src, reps)
    return Signal(src[:n_audio], config.audio_rate)


def _ideal_reference(config: ScenarioConfig) -> Signal:
    """The program as a perfectly aligned, noiseless link would deliver it."""
    source = _fit_source(config)
    gain = preamp_gain(config.preamp)
    pre = Signal(gain * source.samples, config.audio_rate)
    tx = led_drive_resistor(pre, config.led_supply)
    a = np.asarray(config.channel.transconductance, dtype=np.float64)
    mean_a = float(np.mean(a))
    clean = Signal(tx.samples * mean_a, config.audio_rate)
    digital = discretize(design_bandpass(config.bandpass), config.audio_rate)
    return power_amp(filter_apply(digital, clean), config.pa_gain,
                     config.pa_clip)


def _run_audio_path(config: ScenarioConfig, theta_ctrl: np.ndarray, n_ctrl: int):
    source = _fit_source(config)
    n_audio = len(source)
    ratio = int(round(config.audio_rate / config.control_rate))

    # beam error: zero-order hold of the control-rate angle series; after an
    # abort the transmitter has left the beam cone for good
    err = np.full(n_ctrl, math.pi / 2)
    err[:theta_ctrl.size] = theta_ctrl - config.set_angle
    mis = np.repeat(err, ratio)[:n_audio]
    if mis.size < n_audio:
        mis = np.concatenate([mis, np.full(n_audio - mis.size, mis[-1])])

    t_audio = np.arange(n_audio) / config.audio_rate
    _, _, lateral = base_coupling(config.vibration, t_audio, config.pendulum.g)
    mis = np.clip(mis + lateral, -math.pi, math.pi)

    gain = preamp_gain(config.preamp)
    pre = Signal(gain * source.samples, config.audio_rate)
    tx = led_drive_resistor(pre, config.led_supply)
    received = channel_transmit(tx, config.channel, mis, config.seed)
    digital = discretize(design_bandpass(config.bandpass), config.audio_rate)
    rx = power_amp(filter_apply(digital, received), config.pa_gain,
                   config.pa_clip)
    return tx, rx


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

def classify_stability(t: np.ndarray, theta: np.ndarray, set_angle: float,
                       thresholds: StabilityThresholds = None) -> StabilityReport:
    """Grade the tail of an angle trace: peak-to-peak of the last-20% window
    under 1 deg is stable, under 8 deg a small oscillation, else large."""
    th = thresholds or StabilityThresholds()
    t = np.asarray(t, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if t.size != theta.size or t.size < 2:
        raise InvalidInputError("need matching t/theta series of length >= 2")
    start = int(np.floor(t.size * (1.0 - th.window_fraction)))
    window = theta[start:]
    span = t[-1] - t[start]
    if span < th.min_window:
        raise InvalidInputError(
            f"settled window spans {span:.2f}s, need >= {th.min_window}s")
    pp = float(window.max() - window.min())
    if pp < th.stable_pp:
        return StabilityReport(set_angle, STABLE,
                               steady_angle=float(window.mean()),
                               oscillation_amplitude=pp / 2.0)
    if pp < th.small_pp:
        return StabilityReport(set_angle, SMALL_OSCILLATION,
                               oscillation_amplitude=pp / 2.0)
    return StabilityReport(set_angle, LARGE_OSCILLATION,
                           oscillation_amplitude=pp / 2.0)


def _align(x: np.ndarray, r: np.ndarray, rate: float, max_lag: float):
    """Delay- and polarity-compensate r against x by peak cross-correlation."""
    n = x.size
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    corr = np.fft.irfft(np.fft.rfft(r, nfft) * np.conj(np.fft.rfft(x, nfft)),
                        nfft)
    max_shift = min(n - 1, int(max_lag * rate))
    lags = np.concatenate([np.arange(0, max_shift + 1),
                           np.arange(-max_shift, 0)])
    vals = corr[lags % nfft]
    best = int(np.argmax(np.abs(vals)))
    lag = int(lags[best])
    polarity = 1.0 if vals[best] >= 0 else -1.0
    if lag >= 0:
        return x[: n - lag], polarity * r[lag:]
    return x[-lag:], polarity * r[: n + lag]


def classify_audio(source: Signal, received: Signal,
                   thresholds: AudioThresholds = None) -> AudioReport:
    """Frame-based link grading against the transmitted program.

    The received trace is delay-compensated by the peak cross-correlation lag
    (polarity folded in, since the bias stage inverts). A 20 ms frame drops if
    its RMS falls under rx_floor or it decorrelates from the aligned source
    frame; the dropout fraction and kept-frame SNR pick the category.
    """
    th = thresholds or AudioThresholds()
    if source.sample_rate != received.sample_rate:
        raise InvalidInputError("source and received sample rates differ")
    if source.rms() < 1e-12:
        raise MetricUndefinedError("source program is silent")

    n = min(len(source), len(received))
    x, r = _align(source.samples[:n], received.samples[:n],
                  source.sample_rate, th.max_lag)

    frame_len = max(1, int(round(th.frame * source.sample_rate)))
    n_frames = x.size // frame_len
    if n_frames < 1:
        raise InvalidInputError("signals shorter than one frame")

    considered = 0
    dropped = 0
    corrs = []
    kept_x = []
    kept_r = []
    for k in range(n_frames):
        sl = slice(k * frame_len, (k + 1) * frame_len)
        xf, rf = x[sl], r[sl]
        x_rms = math.sqrt(float(np.mean(xf * xf)))
        if x_rms < 1e-9:
            continue  # silent program frame: nothing to judge
        considered += 1
        r_rms = math.sqrt(float(np.mean(rf * rf)))
        if r_rms < th.rx_floor or r_rms == 0.0:
            dropped += 1
            continue
        c = float(np.dot(xf, rf) / (np.linalg.norm(xf) * np.linalg.norm(rf)))
        corrs.append(c)
        if c < th.min_correlation:
            dropped += 1
        else:
            kept_x.append(xf)
            kept_r.append(rf)

    if considered == 0:
        raise MetricUndefinedError("no non-silent program frames to judge")
    dropout = dropped / considered
    mean_corr = float(np.mean(corrs)) if corrs else 0.0
    mean_corr = min(1.0, max(-1.0, mean_corr))

    if kept_x:
        xs = np.concatenate(kept_x)
        rs = np.concatenate(kept_r)
        alpha = float(np.dot(rs, xs) / np.dot(xs, xs))
        resid = rs - alpha * xs
        p_sig = float(np.sum((alpha * xs) ** 2))
        p_noise = float(np.sum(resid ** 2))
        snr_db = 10.0 * math.log10(p_sig / p_noise) if p_noise > 0 else math.inf
    else:
        snr_db = -math.inf

    if dropout < th.dropout_complete:
        cls = COMPLETE if snr_db >= th.snr_complete_db else COMPLETE_WITH_NOISE
    elif dropout <= th.dropout_vanish:
        cls = INTERMITTENT
    else:
        cls = VANISH
    return AudioReport(cls, dropout, mean_corr, snr_db)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _run_indexed(args):
    idx, config = args
    return idx, run_scenario(config)


def _run_many(configs, jobs: int):
    """Order-preserving scenario evaluation, optionally across processes."""
    if jobs <= 1 or len(configs) <= 1:
        return [run_scenario(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_run_indexed, list(enumerate(configs))))
    results.sort(key=lambda pair: pair[0])
    return [r for _, r in results]


def stability_sweep(base: ScenarioConfig, set_angles, jobs: int = 1):
    """One independent run per set angle (audio path disabled), in order."""
    configs = [replace(base, set_angle=float(a), audio_source=None,
                       seed=base.seed + i)
               for i, a in enumerate(set_angles)]
    return [res.stability for res in _run_many(configs, jobs)]


def link_test(base: ScenarioConfig, profiles, jobs: int = 1):
    """Full link matrix: each vibration profile with controller on and off.

    Returns a list of (profile, result_on, result_off); per-run seeds are
    base.seed + row-major index.
    """
    configs = []
    for i, profile in enumerate(profiles):
        for j, on in enumerate((True, False)):
            configs.append(replace(base, vibration=profile, controller_on=on,
                                   seed=base.seed + 2 * i + j))
    results = _run_many(configs, jobs)
    return [(profiles[i], results[2 * i], results[2 * i + 1])
            for i in range(len(profiles))]
