"""Carrier generation and I/Q demodulation of microphone audio.

The transmit side is a single continuous tone.  The receive side mixes the
microphone signal down with the same carrier, low-pass filters it with a
linear-phase FIR and decimates to the baseband rate.  An echo delayed by a
constant ``tau`` shows up as the constant phasor ``g * exp(-2j*pi*f*tau)``.
"""
from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .errors import ConfigurationError, ContractViolation

CARRIER_AMPLITUDE = 0.9
UPDATE_RATE = 25  # Hz, one cursor update per audio frame


@dataclass(frozen=True)
class SonarConfig:
    sample_rate: int = 48000
    carrier_freq: float = 20000.0
    frame_len: int = 1920
    baseband_rate: int = 480
    speed_of_sound: float = 343.0
    # FIR design; odd tap count so the group delay is a whole number of samples
    fir_taps: int = 1201
    fir_cutoff: float = 140.0
    fir_atten_db: float = 80.0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.baseband_rate <= 0:
            raise ConfigurationError("rates must be positive")
        if self.sample_rate % self.baseband_rate:
            raise ConfigurationError(
                f"sample_rate {self.sample_rate} is not a multiple of baseband_rate {self.baseband_rate}"
            )
        if not 0 < self.carrier_freq < self.sample_rate / 2:
            raise ConfigurationError("carrier must lie below the Nyquist frequency")
        if self.frame_len * UPDATE_RATE != self.sample_rate:
            raise ConfigurationError(
                f"frame_len must give a {UPDATE_RATE} Hz update rate at {self.sample_rate} Hz"
            )
        if self.fir_taps % 2 == 0 or self.fir_taps < 3:
            raise ConfigurationError("fir_taps must be odd and >= 3")
        if not 0 < self.fir_cutoff <= self.baseband_rate / 2:
            raise ConfigurationError("fir_cutoff must not exceed half the baseband rate")

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in mm."""
        return 1000.0 * self.speed_of_sound / self.carrier_freq

    @property
    def decimation(self) -> int:
        return self.sample_rate // self.baseband_rate

    @property
    def group_delay(self) -> int:
        """Low-pass group delay in input samples."""
        return (self.fir_taps - 1) // 2

    @property
    def frame_duration(self) -> float:
        return self.frame_len / self.sample_rate


@dataclass
class AudioFrame:
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ContractViolation("audio frames are mono")
        if not np.all(np.isfinite(self.samples)):
            raise ContractViolation("audio frame contains non-finite samples")

    def __len__(self):
        return len(self.samples)


@dataclass
class BasebandFrame:
    """Complex baseband samples; ``times`` are group-delay compensated."""

    samples: np.ndarray
    rate: float
    start_time: float
    times: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.times is None:
            self.times = self.start_time + np.arange(len(self.samples)) / self.rate

    def __len__(self):
        return len(self.samples)


def carrier_phase_at(config: SonarConfig, index, phase0: float = 0.0):
    """Carrier phase at integer sample ``index``, reduced mod 2*pi.

    The reduction is done on the cycle count before scaling so long streams do
    not lose precision.
    """
    cycles = np.mod(np.asarray(index, dtype=np.float64) * (config.carrier_freq / config.sample_rate), 1.0)
    return 2 * np.pi * cycles + phase0


def generate_carrier(config: SonarConfig, n: int, phase0: float = 0.0,
                     start_time: float = 0.0) -> AudioFrame:
    """``n`` samples of ``0.9 * cos(2*pi*f*i/fs + phase0)``.

    Chain frames by passing ``next_carrier_phase(config, n, phase0)`` as the
    next call's ``phase0``.
    """
    if n <= 0:
        raise ContractViolation("n must be positive")
    phase = carrier_phase_at(config, np.arange(n), phase0)
    return AudioFrame(CARRIER_AMPLITUDE * np.cos(phase), start_time)


def next_carrier_phase(config: SonarConfig, n: int, phase0: float = 0.0) -> float:
    return float(np.mod(carrier_phase_at(config, n, phase0), 2 * np.pi))


@lru_cache(maxsize=8)
def _lowpass_taps(sample_rate, taps, cutoff, atten_db):
    beta = sps.kaiser_beta(atten_db)
    return sps.firwin(taps, cutoff, window=("kaiser", beta), fs=sample_rate)


def lowpass_taps(config: SonarConfig) -> np.ndarray:
    """Kaiser-window FIR used before decimation (unit DC gain)."""
    h = _lowpass_taps(config.sample_rate, config.fir_taps, config.fir_cutoff, config.fir_atten_db)
    h.setflags(write=False)
    return h


class Demodulator:
    """Streaming mixer + FIR decimator.

    Keeps the last ``fir_taps - 1`` mixed samples between frames and the global
    sample index, so the decimation phase and carrier phase continue across
    frames.  Output is produced only where the filter window is full; the first
    frame of a stream therefore yields fewer samples than later ones.

    With the default 48 kHz / 480 Hz rates a 1920-sample frame spans 19.2
    baseband periods, so steady-state frames carry 19 or 20 samples.
    """

    def __init__(self, config: SonarConfig = SonarConfig(), carrier_phase: float = 0.0,
                 start_time: float = 0.0):
        self.config = config
        self.carrier_phase = carrier_phase
        self.start_time = start_time
        self._h = lowpass_taps(config)[::-1].copy()
        self._hist = np.zeros(0, dtype=np.complex128)
        self._n = 0  # global index of the next input sample

    def reset(self):
        self._hist = np.zeros(0, dtype=np.complex128)
        self._n = 0

    def process(self, samples: np.ndarray) -> BasebandFrame:
        cfg = self.config
        x = np.asarray(samples, dtype=np.float64)
        n0 = self._n
        idx = np.arange(n0, n0 + len(x))
        mixed = 2.0 * x * np.exp(-1j * carrier_phase_at(cfg, idx, self.carrier_phase))
        buf = np.concatenate([self._hist, mixed])
        buf_start = n0 - len(self._hist)  # global index of buf[0]
        self._n = n0 + len(x)

        ntaps = cfg.fir_taps
        d = cfg.decimation
        first = max(ntaps - 1, buf_start + ntaps - 1, n0)
        first = -(-first // d) * d
        outs = np.arange(first, self._n, d)
        if len(outs):
            windows = sliding_window_view(buf, ntaps)[outs - (ntaps - 1) - buf_start]
            y = windows @ self._h
        else:
            y = np.zeros(0, dtype=np.complex128)
        keep = min(ntaps - 1, len(buf))
        self._hist = buf[len(buf) - keep:].copy()

        times = self.start_time + (outs - cfg.group_delay) / cfg.sample_rate
        t0 = float(times[0]) if len(times) else self.start_time + (first - cfg.group_delay) / cfg.sample_rate
        return BasebandFrame(y, float(cfg.baseband_rate), t0, times)

    def process_frame(self, frame: AudioFrame) -> BasebandFrame:
        if len(frame) != self.config.frame_len:
            raise ContractViolation(
                f"expected {self.config.frame_len} samples per frame, got {len(frame)}"
            )
        return self.process(frame.samples)


def iq_demodulate(frame: AudioFrame, config: SonarConfig = SonarConfig(),
                  carrier_phase: float = 0.0) -> BasebandFrame:
    """Demodulate one isolated frame.

    ``carrier_phase`` is the transmit carrier phase at the frame's first
    sample.  Without history only the outputs whose filter window lies inside
    the frame are returned; use :class:`Demodulator` for streams.
    """
    demod = Demodulator(config, carrier_phase, frame.start_time)
    return demod.process_frame(frame)


def demodulate_stream(samples: np.ndarray, config: SonarConfig = SonarConfig(),
                      carrier_phase: float = 0.0, start_time: float = 0.0) -> BasebandFrame:
    """Demodulate a whole recording in one call (same output as frame-by-frame)."""
    return Demodulator(config, carrier_phase, start_time).process(samples)


def phase_to_displacement(phase, wavelength: float):
    """Finger displacement (mm) for a baseband phase change (rad).

    The echo travels out and back, so one carrier cycle of phase is half a
    wavelength of finger motion.  Moving away makes the phase decrease.
    """
    return -np.asarray(phase) * wavelength / (4 * math.pi)


# -- WAV I/O --------------------------------------------------------------------

def write_wav(path, samples, sample_rate: int = 48000):
    """Write mono 16-bit PCM.  Samples are in full-scale units and are clipped to [-1, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ContractViolation("only mono audio is supported")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("audio contains non-finite samples")
    pcm = np.round(np.clip(x, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def read_wav(path, expected_rate: int | None = 48000) -> tuple[np.ndarray, int]:
    """Read mono 16-bit PCM; returns ``(samples in [-1, 1], sample_rate)``."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ConfigurationError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1 or width != 2:
        raise ConfigurationError(f"{path}: expected mono 16-bit PCM, got {channels} ch x {8 * width} bit")
    if expected_rate is not None and rate != expected_rate:
        raise ConfigurationError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0, rate
