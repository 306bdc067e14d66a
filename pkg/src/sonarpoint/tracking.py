"""Baseband -> 1D cursor: static-vector removal, phase unwrapping, smoothing.

The static component of the baseband (direct path plus every non-moving
reflector) is estimated per channel from local extrema: while the finger moves
the dynamic phasor circles the static point, so the midpoint of a max/min pair
on the real (or imaginary) channel is that channel's static value.  Pairs with
a peak-to-peak below ``pp_threshold`` are ignored, which restricts tracking to
echoes strong enough to come from a nearby finger.
"""
from __future__ import annotations

import math
import time as _time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractViolation
from .signals import AudioFrame, BasebandFrame, Demodulator, SonarConfig

FULL_SCALE = 1.0


@dataclass
class LevdState:
    pp_threshold: float = 0.05 * FULL_SCALE
    max_hold: float = 2.0
    hysteresis_fraction: float = 0.25
    consistency_fraction: float = 0.35
    history: int = 16
    raw: np.ndarray = field(default_factory=kernels.new_levd_state, repr=False)
    last_extrema: deque = field(default=None, repr=False)

    def __post_init__(self):
        if not self.pp_threshold > 0:
            raise ContractViolation("pp_threshold must be positive")
        if self.last_extrema is None:
            self.last_extrema = deque(maxlen=self.history)

    @property
    def static_estimate(self) -> complex:
        re = self.raw[kernels.STATIC]
        im = self.raw[kernels.CH_STRIDE + kernels.STATIC]
        return complex(re, im)

    @property
    def locked(self) -> bool:
        """True once both channels have seen a valid extrema pair."""
        return bool(self.raw[kernels.STATIC_OK] and self.raw[kernels.CH_STRIDE + kernels.STATIC_OK])

    def last_refresh(self) -> float:
        """Time of the oldest channel refresh, NaN before lock."""
        a = self.raw[kernels.REFRESH_T]
        b = self.raw[kernels.CH_STRIDE + kernels.REFRESH_T]
        return float(min(a, b)) if self.locked else math.nan

    def is_stale(self, now: float) -> bool:
        last = self.last_refresh()
        return not (now - last <= self.max_hold)

    @property
    def gate(self) -> float:
        return 0.25 * self.pp_threshold


@dataclass
class PhaseTrack:
    wavelength: float = SonarConfig().wavelength
    unwrapped_phase: float = 0.0
    last_wrapped: float = 0.0
    started: bool = False

    @property
    def displacement(self) -> float:
        """Finger displacement in mm; positive = moving away from the device."""
        return -self.unwrapped_phase * self.wavelength / (4 * math.pi)

    @property
    def path_change(self) -> float:
        return 2.0 * self.displacement


def _run_levd(state: LevdState, baseband: BasebandFrame):
    n = len(baseband)
    re = np.ascontiguousarray(baseband.samples.real)
    im = np.ascontiguousarray(baseband.samples.imag)
    t = np.ascontiguousarray(baseband.times, dtype=np.float64)
    dyn_re = np.empty(n)
    dyn_im = np.empty(n)
    phase = np.empty(n)
    ext = np.empty((2 * n, 4))
    hyst = state.hysteresis_fraction * state.pp_threshold
    tol = state.consistency_fraction
    n_ext = kernels.levd_unwrap(re, im, t, state.raw, state.pp_threshold, hyst, tol, state.gate,
                                dyn_re, dyn_im, phase, ext)
    for ch, kind, val, vt in ext[:n_ext]:
        state.last_extrema.append((int(ch), "max" if kind > 0 else "min", float(val), float(vt)))
    return dyn_re + 1j * dyn_im, phase


def levd_update(state: LevdState, baseband: BasebandFrame):
    """Update the static estimate from ``baseband`` and return the dynamic vector.

    The state is updated in place and also returned for chaining.  Phase
    unwrapping runs in the same pass (kept in ``state.raw``); use
    :func:`unwrap_and_convert` for the standalone conversion.
    """
    dynamic, _ = _run_levd(state, baseband)
    return state, dynamic


def unwrap_and_convert(track: PhaseTrack, dynamic, gate: float = 0.0) -> PhaseTrack:
    """Accumulate the phase of ``dynamic`` samples into ``track``.

    Samples whose magnitude is below ``gate`` keep the previous phase.
    """
    dyn = np.asarray(dynamic, dtype=np.complex128)
    phase = track.unwrapped_phase
    last = track.last_wrapped
    started = track.started
    for z, w in zip(np.abs(dyn).tolist(), np.angle(dyn).tolist()):
        if z < gate or z == 0.0:
            continue
        if not started:
            started, last = True, w
            continue
        d = w - last
        if d > math.pi:
            d -= 2 * math.pi
        elif d <= -math.pi:
            d += 2 * math.pi
        phase += d
        last = w
    track.unwrapped_phase = phase
    track.last_wrapped = last
    track.started = started
    return track


@dataclass
class OneEuroState:
    """Speed-adaptive low-pass (Casiez et al. one-euro filter).

    ``beta`` is per mm/s of smoothed speed; cutoffs are in Hz.
    """

    min_cutoff: float = 1.0
    beta: float = 0.01
    d_cutoff: float = 1.0
    prev_x: float = math.nan
    prev_dx: float = 0.0
    prev_t: float = math.nan

    def __post_init__(self):
        if self.min_cutoff <= 0 or self.d_cutoff <= 0 or self.beta < 0:
            raise ContractViolation("one-euro cutoffs must be positive and beta non-negative")


def _alpha(cutoff: float, dt: float) -> float:
    tau = 1.0 / (2 * math.pi * cutoff)
    return 1.0 / (1.0 + tau / dt)


def one_euro(state: OneEuroState, x: float, t: float):
    """Filter one sample; returns ``(state, x_hat)``.  ``state`` is updated in place."""
    if math.isnan(state.prev_t):
        state.prev_x, state.prev_dx, state.prev_t = x, 0.0, t
        return state, x
    dt = t - state.prev_t
    if not dt > 0:
        raise ContractViolation(f"time must increase (got {t} after {state.prev_t})")
    dx = (x - state.prev_x) / dt
    edx = state.prev_dx + _alpha(state.d_cutoff, dt) * (dx - state.prev_dx)
    cutoff = state.min_cutoff + state.beta * abs(edx)
    x_hat = state.prev_x + _alpha(cutoff, dt) * (x - state.prev_x)
    state.prev_x, state.prev_dx, state.prev_t = x_hat, edx, t
    return state, x_hat


@dataclass(frozen=True)
class CursorState:
    position: float
    velocity: float
    time: float
    quality: float
    raw_displacement: float = 0.0


class Tracker:
    """Audio frames in, one :class:`CursorState` per frame out.

    The cursor maps finger displacement 1:1 to millimetres of on-screen
    travel, offset by ``origin``.
    """

    def __init__(self, config: SonarConfig = SonarConfig(), levd: LevdState | None = None,
                 filt: OneEuroState | None = None, origin: float = 0.0, carrier_phase: float = 0.0,
                 start_time: float = 0.0):
        self.config = config
        self.demod = Demodulator(config, carrier_phase, start_time)
        self.levd = levd if levd is not None else LevdState()
        self.filt = filt if filt is not None else OneEuroState()
        self.origin = origin
        self._zero = 0.0  # raw displacement that maps to ``origin``
        self._frames = 0
        self._last: CursorState | None = None
        self.last_frame_seconds = 0.0

    @property
    def phase(self) -> float:
        return float(self.levd.raw[kernels.UNWRAPPED])

    @property
    def raw_displacement(self) -> float:
        return -self.phase * self.config.wavelength / (4 * math.pi)

    def phase_track(self) -> PhaseTrack:
        raw = self.levd.raw
        return PhaseTrack(self.config.wavelength, float(raw[kernels.UNWRAPPED]),
                          float(raw[kernels.UNWRAPPED - 1]), bool(raw[kernels.UNWRAPPED - 2]))

    def recenter(self, position: float):
        """Make the current finger position read as ``position`` from now on."""
        self.origin = position
        self._zero = self.raw_displacement
        self.filt = OneEuroState(self.filt.min_cutoff, self.filt.beta, self.filt.d_cutoff)

    def track_frame(self, frame: AudioFrame) -> CursorState:
        t_start = _time.perf_counter()
        bb = self.demod.process_frame(frame)
        frame_end = frame.start_time + self.config.frame_duration
        if len(bb):
            dynamic, _ = _run_levd(self.levd, bb)
            t = float(bb.times[-1])
            mag = abs(dynamic[-1])
        else:
            t = frame_end - self.config.group_delay / self.config.sample_rate
            mag = 0.0
        quality = min(1.0, mag / self.levd.pp_threshold)
        if self.levd.is_stale(t):
            quality *= 0.5
        raw = self.raw_displacement - self._zero
        if self._last is not None and t <= self._last.time:
            t = self._last.time + self.config.frame_duration
        _, x_hat = one_euro(self.filt, raw, t)
        state = CursorState(self.origin + x_hat, self.filt.prev_dx, t, quality, raw)
        self._last = state
        self._frames += 1
        self.last_frame_seconds = _time.perf_counter() - t_start
        return state

    def track(self, samples: np.ndarray, start_time: float = 0.0) -> list[CursorState]:
        """Track a whole recording (trailing partial frame is dropped)."""
        n = self.config.frame_len
        out = []
        for k in range(len(samples) // n):
            frame = AudioFrame(samples[k * n:(k + 1) * n], start_time + k * self.config.frame_duration)
            out.append(self.track_frame(frame))
        return out


def track_frame(tracker: Tracker, frame: AudioFrame) -> CursorState:
    return tracker.track_frame(frame)
