"""Analog IR audio path: preamp, LED bias, optical channel, band-pass, power amp.

The modeled chain mirrors the rig: a non-inverting preamp drives the IR LED
either through a plain resistor bias (linear, V_LED = V1 - Vi) or through a
transistor bias whose exponential V_be/I_d law injects harmonics. The coupling
tube acts as the implicit modulator/demodulator, so the received current is
just drive * A(t) scaled by a cos^m beam-pointing factor plus shaped noise.
The receiver cleans up with the Table-1 band-pass (two equal-component
unity-gain Sallen-Key low-pass sections cascaded with a third-order high-pass)
and a clipping power amp.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import (InvalidDesignError, InvalidInputError,
                     MetricUndefinedError, NumericFailureError)
from .tf import TransferFunction

_EXP_LIMIT = 700.0  # exp() argument beyond which float64 overflows


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled voltage waveform."""

    samples: np.ndarray
    sample_rate: float  # Hz

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise InvalidInputError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("samples must be finite")
        if not (self.sample_rate > 0):
            raise InvalidInputError("sample_rate must be positive")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))


def sine(freq: float, amplitude: float, duration: float, sample_rate: float,
         phase: float = 0.0) -> Signal:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return Signal(amplitude * np.sin(2 * np.pi * freq * t + phase), sample_rate)


def tone_mix(freqs, amps, duration: float, sample_rate: float) -> Signal:
    """Sum of sines; the stock deterministic test program."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for f, a in zip(freqs, amps):
        out += a * np.sin(2 * np.pi * f * t)
    return Signal(out, sample_rate)


# ---------------------------------------------------------------------------
# Transmit side
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplifierSpec:
    r1: float  # feedback resistor, ohm
    r2: float  # ground leg resistor, ohm

    def __post_init__(self):
        if self.r1 < 0 or not (self.r2 > 0):
            raise InvalidInputError("need r1 >= 0 and r2 > 0")


def preamp_gain(spec: AmplifierSpec) -> float:
    """Non-inverting gain A_V = 1 + R1/R2."""
    return 1.0 + spec.r1 / spec.r2


@dataclass(frozen=True)
class TransistorModel:
    beta_t: float        # current scale, A
    v_th: float          # threshold voltage, V
    v_t: float = 0.026   # thermal voltage, V

    def __post_init__(self):
        if not (self.beta_t > 0 and self.v_t > 0):
            raise InvalidInputError("beta_t and v_t must be positive")


def led_drive_resistor(sig: Signal, v1: float) -> Signal:
    """Resistor bias: LED terminal voltage V_LED = V1 - Vi, samplewise."""
    return Signal(v1 - sig.samples, sig.sample_rate)


def led_drive_transistor(sig: Signal, model: TransistorModel,
                         v_bias: float) -> Signal:
    """Transistor bias: I_d = beta * exp((V_be - V_th)/V_T), V_be = v_bias + Vi.

    Strictly positive output; the exponential injects harmonic content as
    soon as the drive is more than a small fraction of V_T.
    """
    arg = (v_bias + sig.samples - model.v_th) / model.v_t
    if np.max(arg) > _EXP_LIMIT:
        raise NumericFailureError(
            f"transistor drive overflows exp(): max exponent {np.max(arg):.1f}")
    return Signal(model.beta_t * np.exp(arg), sig.sample_rate)


def am_modulate(sig: Signal, carrier_amp: float, carrier_freq: float) -> Signal:
    """Reference AM: f(t) * A * sin(2 pi fc t). The coupling-tube path does
    not use this; the tube modulates/demodulates implicitly."""
    if not (carrier_freq < sig.sample_rate / 2):
        raise InvalidInputError("carrier frequency must be below Nyquist")
    t = sig.times()
    return Signal(sig.samples * carrier_amp * np.sin(2 * np.pi * carrier_freq * t),
                  sig.sample_rate)


# ---------------------------------------------------------------------------
# Optical channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    broadband_rms: float = 0.0   # white, V
    low_rms: float = 0.0         # band-limited below 10 Hz, V
    high_rms: float = 0.0        # band-limited above 10 kHz, V

    def __post_init__(self):
        if min(self.broadband_rms, self.low_rms, self.high_rms) < 0:
            raise InvalidInputError("noise RMS values must be >= 0")


@dataclass(frozen=True)
class ChannelSpec:
    """Coupling-tube channel: received = drive * A(t) * cos^m(mis) + noise."""

    transconductance: object = 0.8        # scalar A, or per-sample array A(t)
    lambert_order: float = 1.0            # beam-profile exponent m
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    rx_floor: float = 0.0                 # minimum usable received RMS, V

    def __post_init__(self):
        a = np.asarray(self.transconductance, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("transconductance must be finite")
        if self.lambert_order < 0:
            raise InvalidInputError("lambert_order must be >= 0")
        if self.rx_floor < 0:
            raise InvalidInputError("rx_floor must be >= 0")


LOW_BAND_EDGE_HZ = 10.0
HIGH_BAND_EDGE_HZ = 10_000.0


def synthesize_noise(spec: NoiseSpec, n: int, sample_rate: float,
                     seed: int) -> np.ndarray:
    """Three independent shaped generators, each normalized to its target RMS.

    Deterministic for a given seed; separate PCG64 streams per band so one
    band's settings never perturb another band's draw.
    """
    out = np.zeros(n)
    if spec.broadband_rms > 0:
        raw = np.random.default_rng((seed, 0)).standard_normal(n)
        out += _to_rms(raw, spec.broadband_rms)
    if spec.low_rms > 0:
        raw = np.random.default_rng((seed, 1)).standard_normal(n)
        sos = sps.butter(2, LOW_BAND_EDGE_HZ, "lowpass", fs=sample_rate,
                         output="sos")
        out += _to_rms(sps.sosfilt(sos, raw), spec.low_rms)
    if spec.high_rms > 0:
        raw = np.random.default_rng((seed, 2)).standard_normal(n)
        corner = min(HIGH_BAND_EDGE_HZ, 0.45 * sample_rate)
        sos = sps.butter(2, corner, "highpass", fs=sample_rate, output="sos")
        out += _to_rms(sps.sosfilt(sos, raw), spec.high_rms)
    return out


def _to_rms(x: np.ndarray, target: float) -> np.ndarray:
    rms = np.sqrt(np.mean(x ** 2))
    if rms == 0.0:
        return x
    return x * (target / rms)


def pointing_gain(misalignment, lambert_order: float):
    """Generalized Lambertian cos^m factor; zero at and beyond the beam edge."""
    mis = np.asarray(misalignment, dtype=np.float64)
    if np.any(np.abs(mis) > np.pi):
        raise InvalidInputError("|misalignment| must be <= pi")
    c = np.cos(mis)
    gain = np.where(np.abs(mis) < np.pi / 2,
                    np.power(np.clip(c, 0.0, None), lambert_order), 0.0)
    return gain


def channel_transmit(drive: Signal, spec: ChannelSpec, misalignment,
                     seed: int) -> Signal:
    """Receive drive * A(t) * cos^m(misalignment) + shaped noise.

    misalignment may be a scalar or a per-sample array (radians).
    """
    gain = pointing_gain(misalignment, spec.lambert_order)
    a = np.asarray(spec.transconductance, dtype=np.float64)
    received = drive.samples * a * gain
    noise = synthesize_noise(spec.noise, len(drive), drive.sample_rate, seed)
    return Signal(received + noise, drive.sample_rate)


# ---------------------------------------------------------------------------
# Band-pass filter (Table 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterDesign:
    """Component values, SI units; defaults are exactly the Table-1 set."""

    lp1_c: float = 5e-9       # F
    lp1_r: float = 6.8e3      # ohm
    lp2_c: float = 15e-9      # F
    lp2_r: float = 3.6e3      # ohm
    hp_c3: float = 1e-6       # F, series cap
    hp_r3: float = 5e3        # ohm, feedback leg
    hp_c4: float = 1e-6       # F, series cap
    hp_r4: float = 10e3       # ohm, ground leg
    hp_c5: float = 1e-6       # F, first-order section
    hp_r5: float = 10.4e3     # ohm, first-order section

    def __post_init__(self):
        vals = (self.lp1_c, self.lp1_r, self.lp2_c, self.lp2_r, self.hp_c3,
                self.hp_r3, self.hp_c4, self.hp_r4, self.hp_c5, self.hp_r5)
        if not all(v > 0 for v in vals):
            raise InvalidInputError("all component values must be positive")


def rc_design_rule(fc_khz: float, c_nf: float) -> float:
    """Component-selection rule k[kOhm] = 100 / (fc[kHz] * C[nF]).

    This is the rule the component table was chosen with; it is close to,
    but not identical to, the exact single-pole corner 1/(2 pi R C).
    """
    if not (fc_khz > 0 and c_nf > 0):
        raise InvalidInputError("fc and C must be positive")
    return 100.0 / (fc_khz * c_nf)


def _lp_section(r: float, c: float) -> TransferFunction:
    # unity-gain equal-component Sallen-Key low-pass: Q = 1/2
    rc = r * c
    return TransferFunction((1.0,), (rc * rc, 2.0 * rc, 1.0))


def _hp2_section(c_a: float, r_fb: float, c_b: float, r_gnd: float) -> TransferFunction:
    # unity-gain Sallen-Key high-pass; r_fb from mid node to output,
    # r_gnd from the buffer input to ground
    k2 = r_fb * r_gnd * c_a * c_b
    k1 = r_fb * (c_a + c_b)
    return TransferFunction((k2, 0.0, 0.0), (k2, k1, 1.0))


def _hp1_section(r: float, c: float) -> TransferFunction:
    rc = r * c
    return TransferFunction((rc, 0.0), (rc, 1.0))


def design_bandpass(design: FilterDesign) -> TransferFunction:
    """Continuous 7th-order band-pass: LP2 * LP2 * HP2 * HP1 cascade."""
    h = _lp_section(design.lp1_r, design.lp1_c)
    h = h.cascade(_lp_section(design.lp2_r, design.lp2_c))
    h = h.cascade(_hp2_section(design.hp_c3, design.hp_r3,
                               design.hp_c4, design.hp_r4))
    h = h.cascade(_hp1_section(design.hp_r5, design.hp_c5))
    if np.any(h.poles().real >= 0):
        raise InvalidDesignError("filter design has non-left-half-plane poles")
    return h


def frequency_response(tf: TransferFunction, freqs) -> tuple:
    """(magnitude dB, phase rad) of tf at s = j 2 pi f, per frequency."""
    f = np.asarray(freqs, dtype=np.float64)
    if np.any(f <= 0):
        raise InvalidInputError("frequencies must be positive")
    h = tf(1j * 2 * np.pi * f)
    return 20.0 * np.log10(np.abs(h)), np.angle(h)


def group_delay(tf: TransferFunction, f: float) -> float:
    """-d(phase)/d(omega) by central difference with relative step 1e-4."""
    if not (f > 0):
        raise InvalidInputError("frequency must be positive")
    w = 2 * np.pi * f
    rel = 1e-4
    h_hi = tf(1j * w * (1 + rel))
    h_lo = tf(1j * w * (1 - rel))
    dphi = np.angle(h_hi / h_lo)  # small by construction, no unwrap needed
    return float(-dphi / (2 * rel * w))


# ---------------------------------------------------------------------------
# Digital emulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DigitalFilter:
    """Bilinear-discretized biquad cascade bound to one sample rate."""

    sos: np.ndarray
    sample_rate: float

    def __post_init__(self):
        sos = np.asarray(self.sos, dtype=np.float64)
        sos = sos.copy()
        sos.flags.writeable = False
        object.__setattr__(self, "sos", sos)

    def response(self, freqs) -> tuple:
        """(magnitude dB, phase rad) of the digital cascade."""
        f = np.asarray(freqs, dtype=np.float64)
        _, h = sps.sosfreqz(self.sos, worN=2 * np.pi * f / self.sample_rate)
        return 20.0 * np.log10(np.abs(h)), np.angle(h)

    def zpoles(self) -> np.ndarray:
        poles = []
        for sec in self.sos:
            poles.extend(np.roots(sec[3:]))
        return np.asarray(poles)


def discretize(tf: TransferFunction, sample_rate: float) -> DigitalFilter:
    """Bilinear transform (no pre-warping) into a biquad cascade.

    Requires sample_rate >= 8x the highest pole frequency so the response
    matches the continuous design through sample_rate/8.
    """
    poles = tf.poles()
    if poles.size:
        f_pole = np.max(np.abs(poles)) / (2 * np.pi)
        if sample_rate < 8.0 * f_pole:
            raise InvalidInputError(
                f"sample rate {sample_rate} Hz undersamples the design "
                f"(highest pole {f_pole:.1f} Hz needs >= {8 * f_pole:.1f} Hz)")
    z, p, k = sps.tf2zpk(tf.num, tf.den)
    zd, pd, kd = sps.bilinear_zpk(z, p, k, fs=sample_rate)
    if np.any(np.abs(pd) >= 1.0):
        raise InvalidDesignError("discretized filter is unstable")
    return DigitalFilter(sps.zpk2sos(zd, pd, kd), sample_rate)


def filter_apply(filt: DigitalFilter, sig: Signal) -> Signal:
    """LTI filtering with zero initial state."""
    if sig.sample_rate != filt.sample_rate:
        raise InvalidInputError(
            f"signal rate {sig.sample_rate} != filter rate {filt.sample_rate}")
    # sosfilt needs writable buffers; Signal freezes its samples
    return Signal(sps.sosfilt(np.array(filt.sos), sig.samples.copy()),
                  sig.sample_rate)


# ---------------------------------------------------------------------------
# Power amp and metrics
# ---------------------------------------------------------------------------

def power_amp(sig: Signal, gain: float, clip_level: float) -> Signal:
    """Linear gain with hard symmetric clipping at +/-clip_level."""
    if not (gain > 0 and clip_level > 0):
        raise InvalidInputError("gain and clip_level must be positive")
    return Signal(np.clip(gain * sig.samples, -clip_level, clip_level),
                  sig.sample_rate)


THD_HARMONICS = range(2, 11)


def thd(sig: Signal, fundamental: float) -> float:
    """Total harmonic distortion: sqrt(sum of harmonic 2..10 powers) over the
    fundamental, from a Hann-windowed FFT with per-harmonic peak picking."""
    n = len(sig)
    if not (fundamental > 0):
        raise InvalidInputError("fundamental must be positive")
    if fundamental >= sig.sample_rate / 10:
        raise InvalidInputError("fundamental must be below sample_rate/10")
    if n < 10 * sig.sample_rate / fundamental:
        raise InvalidInputError("need at least 10 fundamental periods")

    win = np.hanning(n)
    spectrum = np.abs(np.fft.rfft(sig.samples * win))
    bin_f = sig.sample_rate / n

    def peak(freq):
        k = freq / bin_f
        lo = max(0, int(np.floor(k)) - 3)
        hi = min(spectrum.size, int(np.ceil(k)) + 4)
        return float(np.max(spectrum[lo:hi]))

    a1 = peak(fundamental)
    floor = float(np.median(spectrum))
    if a1 <= 0 or a1 < 10.0 * floor:
        raise MetricUndefinedError("fundamental is below the noise floor")
    harmonic_power = sum(peak(h * fundamental) ** 2 for h in THD_HARMONICS
                         if h * fundamental < sig.sample_rate / 2)
    return math.sqrt(harmonic_power) / a1


# ---------------------------------------------------------------------------
# WAV interface: 16-bit PCM mono little-endian
# ---------------------------------------------------------------------------

def write_wav(path, sig: Signal, full_scale: float = 1.0) -> None:
    """Write 16-bit PCM mono; +/-full_scale volts maps to int16 full scale."""
    if not (full_scale > 0):
        raise InvalidInputError("full_scale must be positive")
    scaled = np.clip(sig.samples / full_scale, -1.0, 1.0)
    pcm = np.round(scaled * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(round(sig.sample_rate)))
        w.writeframes(pcm.tobytes())


def read_wav(path, full_scale: float = 1.0) -> Signal:
    """Read 16-bit PCM mono back into volts."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise InvalidInputError("expected 16-bit PCM mono WAV")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return Signal(pcm / 32767.0 * full_scale, float(rate))
