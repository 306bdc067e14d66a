"""Synthetic ground truth: microphone audio for a moving finger, and IMU streams.

Echo model: every reflector returns the transmitted tone delayed by its
round-trip time.  Because the transmit signal is a single tone, a delay is
exactly a phase shift of the carrier, so time-varying ranges are rendered by
evaluating ``cos(2*pi*f*(t - 2*r(t)/c))`` directly (Doppler included).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .signals import CARRIER_AMPLITUDE, AudioFrame, SonarConfig, carrier_phase_at
from .tracking import Tracker

ECHO_FLOOR_MM = 30.0
IMU_RATE = 100.0
GRAVITY = 9.81

SEGMENT_KINDS = ("hold", "constant_velocity", "min_jerk")


@dataclass(frozen=True)
class Segment:
    kind: str
    duration: float
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigurationError(f"unknown segment kind {self.kind!r}")
        if not self.duration > 0:
            raise ConfigurationError("segment durations must be positive")
        if self.kind == "hold" and self.delta != 0:
            raise ConfigurationError("a hold segment cannot move (position would jump)")

    def shape(self, s):
        """Normalised progress in [0, 1] at normalised time ``s``."""
        if self.kind == "hold":
            return np.zeros_like(s)
        if self.kind == "constant_velocity":
            return s
        return s**3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ConfigurationError("a trajectory needs at least one segment")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def net_displacement(self) -> float:
        return sum(s.delta for s in self.segments)

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def offset(self, t) -> np.ndarray:
        """Displacement from the start position at times ``t`` (held after the end)."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        start, base = 0.0, 0.0
        for seg in self.segments:
            end = start + seg.duration
            s = np.clip((t - start) / seg.duration, 0.0, 1.0)
            live = t > start
            out = np.where(live, base + seg.delta * seg.shape(s), out)
            start, base = end, base + seg.delta
        return out

    def to_dict(self):
        return [{"kind": s.kind, "duration_s": s.duration, "delta_mm": s.delta} for s in self.segments]

    @classmethod
    def from_dict(cls, rows):
        return cls(tuple(Segment(r["kind"], float(r["duration_s"]), float(r.get("delta_mm", 0.0))) for r in rows))


@dataclass(frozen=True)
class Finger:
    start_range: float
    gain: float
    trajectory: Trajectory


@dataclass(frozen=True)
class Walker:
    """A person moving about at ~1 m: slow amplitude and range modulation of a far echo."""

    period_s: float = 2.0
    gain: float = 0.004
    range_mm: float = 1000.0
    sway_mm: float = 4.0
    depth: float = 0.5


DEFAULT_STATICS = ((0.0, 0.45), (20.0, 0.12), (45.0, 0.06), (120.0, 0.03))


@dataclass(frozen=True)
class SceneConfig:
    static_reflectors: tuple[tuple[float, float], ...] = DEFAULT_STATICS
    finger: Finger | None = None
    noise_snr_db: float | None = 40.0
    walker: Walker | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "static_reflectors",
                           tuple((float(r), float(g)) for r, g in self.static_reflectors))
        for r, g in self.static_reflectors:
            if r < 0 or g < 0:
                raise ConfigurationError("reflector ranges and gains must be non-negative")
        if self.finger is not None and (self.finger.start_range < 0 or self.finger.gain < 0):
            raise ConfigurationError("finger range and gain must be non-negative")

    def finger_range(self, t) -> np.ndarray:
        f = self.finger
        return f.start_range + f.trajectory.offset(t)


def echo_gain(gain, range_mm):
    """Inverse-square amplitude fall-off below a 30 mm floor."""
    r = np.maximum(np.asarray(range_mm, dtype=np.float64), ECHO_FLOOR_MM)
    return gain * (ECHO_FLOOR_MM / r) ** 2


def noise_sigma(scene: SceneConfig) -> float:
    """White-noise std for the scene's SNR, referenced to the unattenuated finger echo."""
    if scene.noise_snr_db is None:
        return 0.0
    ref = CARRIER_AMPLITUDE * (scene.finger.gain if scene.finger is not None else 1.0)
    return ref / math.sqrt(2.0) * 10 ** (-scene.noise_snr_db / 20.0)


class EchoSynth:
    """Chunked renderer, so a controller can decide finger motion as it goes."""

    def __init__(self, scene: SceneConfig, config: SonarConfig = SonarConfig()):
        self.scene = scene
        self.config = config
        self.rng = np.random.default_rng(scene.seed)
        self.sigma = noise_sigma(scene)
        self.n = 0
        k = 2 * math.pi * config.carrier_freq * 2.0 / (1000.0 * config.speed_of_sound)
        self._rad_per_mm = k  # round-trip carrier phase per mm of range
        self._static = sum(
            g * np.exp(-1j * k * r) for r, g in scene.static_reflectors
        ) if scene.static_reflectors else 0j

    def render(self, finger_range=None, n: int | None = None, finger_gain: float | None = None) -> np.ndarray:
        """Next block of microphone samples.

        ``finger_range`` gives the finger range (mm) at each sample of the
        block; ``None`` renders the scene without a finger for ``n`` samples.
        """
        cfg = self.config
        if finger_range is not None:
            finger_range = np.asarray(finger_range, dtype=np.float64)
            n = len(finger_range)
        idx = np.arange(self.n, self.n + n)
        t = idx / cfg.sample_rate
        phase = carrier_phase_at(cfg, idx)
        # static reflectors collapse into one phasor
        analytic = np.full(n, self._static, dtype=np.complex128)
        if finger_range is not None:
            gain = self.scene.finger.gain if finger_gain is None else finger_gain
            analytic = analytic + echo_gain(gain, finger_range) * np.exp(-1j * self._rad_per_mm * finger_range)
        w = self.scene.walker
        if w is not None:
            arg = 2 * math.pi * t / w.period_s
            amp = w.gain * (1 + w.depth * np.sin(arg))
            rng_mm = w.range_mm + w.sway_mm * np.sin(arg + 1.0)
            analytic = analytic + amp * np.exp(-1j * self._rad_per_mm * rng_mm)
        x = CARRIER_AMPLITUDE * np.real(analytic * np.exp(1j * phase))
        if self.sigma > 0:
            x = x + self.rng.normal(0.0, self.sigma, n)
        self.n += n
        return x


@dataclass
class Recording:
    audio: np.ndarray
    sample_rate: int
    truth_time: np.ndarray
    truth_range: np.ndarray

    @property
    def truth_displacement(self) -> np.ndarray:
        return self.truth_range - self.truth_range[0]

    def truth_at(self, t) -> np.ndarray:
        return np.interp(t, self.truth_time, self.truth_range)


def synthesize_echo(scene: SceneConfig, config: SonarConfig = SonarConfig(),
                    duration: float | None = None) -> Recording:
    """Render ``duration`` seconds of microphone audio plus the finger truth track.

    Truth samples sit on the baseband grid (``k / baseband_rate``).
    """
    if duration is None:
        if scene.finger is None:
            raise ConfigurationError("duration is required for a scene without a finger")
        duration = scene.finger.trajectory.duration
    if not duration > 0:
        raise ConfigurationError("duration must be positive")
    n = int(round(duration * config.sample_rate))
    synth = EchoSynth(scene, config)
    t = np.arange(n) / config.sample_rate
    if scene.finger is not None:
        audio = synth.render(scene.finger_range(t))
    else:
        audio = synth.render(None, n)
    tt = np.arange(0, n, config.decimation) / config.sample_rate
    truth = scene.finger_range(tt) if scene.finger is not None else np.zeros_like(tt)
    return Recording(audio, config.sample_rate, tt, truth)


# -- linear stage -----------------------------------------------------------

DEFAULT_RANGES = ((0.0, 50.0), (50.0, 100.0), (100.0, 150.0), (150.0, 200.0))
DEFAULT_SPEEDS = (40.0, 80.0, 120.0)  # mm/s
DEFAULT_NOISE = ("none", "walker")
FINGER_GAIN = 0.25
WALKER_SNR_DB = 30.0
CLEAN_SNR_DB = 40.0


@dataclass(frozen=True)
class StageTrial:
    scene: SceneConfig
    range_band: tuple[float, float]
    speed: float
    noise: str
    rep: int
    measure_start: float
    measure_end: float

    @property
    def movement(self) -> float:
        return self.scene.finger.trajectory.segments[-2].delta


def stage_trajectory(speed: float, travel: float = 50.0, homing: float = 15.0,
                     settle: float = 1.0, tail: float = 1.0) -> tuple[Trajectory, float]:
    """Hold, home out and back, hold, one ``travel`` mm move, hold.

    The homing stroke gives the static-vector estimator something to lock on
    before the measured move.  Returns the trajectory and the measured move's
    start time.
    """
    stroke = homing / speed
    segs = (
        Segment("hold", settle),
        Segment("constant_velocity", stroke, homing),
        Segment("constant_velocity", stroke, -homing),
        Segment("hold", settle),
        Segment("constant_velocity", travel / speed, travel),
        Segment("hold", tail),
    )
    return Trajectory(segs), settle + 2 * stroke + settle


def linear_stage_protocol(ranges: Sequence = DEFAULT_RANGES, speeds: Sequence = DEFAULT_SPEEDS,
                          noise: Sequence = DEFAULT_NOISE, reps: int = 10, seed: int = 0,
                          finger_gain: float = FINGER_GAIN, statics=DEFAULT_STATICS,
                          clean_snr_db: float = CLEAN_SNR_DB,
                          walker_snr_db: float = WALKER_SNR_DB) -> list[StageTrial]:
    """Full factorial batch of 5 cm stage movements (range x speed x noise x reps)."""
    if not ranges or not speeds or not noise or reps < 1:
        raise ConfigurationError("ranges, speeds and noise must be non-empty and reps >= 1")
    trials = []
    k = 0
    for band in ranges:
        lo, hi = float(band[0]), float(band[1])
        for speed in speeds:
            for cond in noise:
                if cond not in ("none", "walker"):
                    raise ConfigurationError(f"unknown noise condition {cond!r}")
                for rep in range(reps):
                    traj, t0 = stage_trajectory(float(speed), travel=hi - lo)
                    scene = SceneConfig(
                        static_reflectors=statics,
                        finger=Finger(lo, finger_gain, traj),
                        noise_snr_db=walker_snr_db if cond == "walker" else clean_snr_db,
                        walker=Walker() if cond == "walker" else None,
                        seed=seed * 100003 + k,
                    )
                    trials.append(StageTrial(scene, (lo, hi), float(speed), cond, rep, t0, traj.duration))
                    k += 1
    return trials


# -- IMU ----------------------------------------------------------------------

@dataclass
class ImuStream:
    samples: np.ndarray  # (n, 3) m/s^2
    rate: float = IMU_RATE
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1, 3)
        if self.rate != IMU_RATE:
            raise ConfigurationError(f"IMU streams run at {IMU_RATE:g} Hz")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigurationError("IMU samples must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) / self.rate

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class BurstShape:
    freq_range: tuple[float, float] = (30.0, 45.0)
    peak: float = 8.0
    decay: float = 0.05
    peak_jitter: float = 0.0  # log-normal sigma of the per-burst peak


def pinch_burst(t, onset: float, freq: float, peak: float, decay: float) -> np.ndarray:
    """Damped oscillation starting at ``onset``; its largest absolute value is ``peak``."""
    tau = np.asarray(t, dtype=np.float64) - onset
    live = tau >= 0
    x = np.where(live, np.exp(-np.maximum(tau, 0) / decay) * np.sin(2 * np.pi * freq * np.maximum(tau, 0)), 0.0)
    # peak of exp(-t/d) sin(wt) is at tan(wt) = w d
    w = 2 * np.pi * freq
    tp = math.atan(w * decay) / w
    norm = math.exp(-tp / decay) * math.sin(w * tp)
    return peak * x / norm


def synthesize_imu(pinch_times: Sequence[float], noise_rms: float, duration: float, seed: int = 0,
                   shape: BurstShape = BurstShape(), gravity: float = 0.0,
                   drift_rms: float = 0.0, start_time: float = 0.0) -> ImuStream:
    """100 Hz 3-axis accelerometer stream with a burst at each pinch time.

    Each burst lands on one random axis with a random frequency in
    ``shape.freq_range``.  ``gravity`` and ``drift_rms`` add the slow
    components a real wrist sensor sees (both removed by the detector's
    high-pass).
    """
    times = np.sort(np.asarray(pinch_times, dtype=np.float64))
    if np.any(times < start_time) or np.any(times >= start_time + duration):
        raise ConfigurationError("pinch times must lie inside the stream")
    if len(times) > 1 and np.min(np.diff(times)) <= 0.2:
        raise ConfigurationError("pinch bursts closer than 0.2 s overlap")
    rng = np.random.default_rng(seed)
    n = int(round(duration * IMU_RATE))
    t = start_time + np.arange(n) / IMU_RATE
    acc = np.zeros((n, 3))
    if noise_rms > 0:
        acc += rng.normal(0.0, noise_rms, (n, 3))
    if gravity:
        acc[:, 2] += gravity
    if drift_rms > 0:
        for k in range(3):
            f, ph = rng.uniform(0.2, 1.5), rng.uniform(0, 2 * np.pi)
            acc[:, k] += drift_rms * math.sqrt(2) * np.sin(2 * np.pi * f * t + ph)
    for onset in times:
        freq = rng.uniform(*shape.freq_range)
        peak = shape.peak * math.exp(shape.peak_jitter * rng.standard_normal()) if shape.peak_jitter else shape.peak
        axis = rng.integers(0, 3)
        acc[:, axis] += pinch_burst(t, onset, freq, peak, shape.decay)
    return ImuStream(acc, IMU_RATE, start_time)


# calibrated validation conditions: weak pinches (log-normal peak spread) are
# what the detector misses; noise and wrist drift set the false-positive floor
PINCH_NOISE_RMS = 0.3
PINCH_PEAK_JITTER = 0.45
WRIST_DRIFT_RMS = 1.0


def pinch_corpus(n_bursts: int = 840, seed: int = 0, noise_rms: float = PINCH_NOISE_RMS,
                 peak_jitter: float = PINCH_PEAK_JITTER, gap_range=(0.6, 1.6)) -> tuple[ImuStream, np.ndarray]:
    """A validation stream with ``n_bursts`` pinches at random gaps; returns (stream, onsets)."""
    if n_bursts < 1:
        raise ConfigurationError("need at least one burst")
    rng = np.random.default_rng(seed)
    gaps = rng.uniform(*gap_range, n_bursts)
    onsets = 1.0 + np.cumsum(gaps) - gaps[0]
    imu = synthesize_imu(onsets, noise_rms, float(onsets[-1]) + 1.0, seed + 1,
                         BurstShape(peak_jitter=peak_jitter), gravity=GRAVITY, drift_rms=WRIST_DRIFT_RMS)
    return imu, onsets


def quiet_imu(duration: float = 600.0, seed: int = 0, noise_rms: float = PINCH_NOISE_RMS) -> ImuStream:
    """Wrist stream with no pinches, for false-positive counting."""
    return synthesize_imu([], noise_rms, duration, seed, gravity=GRAVITY, drift_rms=WRIST_DRIFT_RMS)


# -- scene files ----------------------------------------------------------------

SCENE_SCHEMA_VERSION = 1
_SCENE_KEYS = {"schema_version", "seed", "duration_s", "static_reflectors", "finger", "noise_snr_db", "walker"}


def _number(d, key, default=None) -> float:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"scene field {key!r} must be a finite number")
    return float(v)


def scene_from_dict(d: dict) -> tuple[SceneConfig, float | None]:
    """Parse a scene document (see ``schemas/scene.schema.json``); returns (scene, duration)."""
    if not isinstance(d, dict):
        raise ConfigurationError("a scene must be a JSON object")
    if d.get("schema_version") != SCENE_SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported scene schema_version {d.get('schema_version')!r} "
                                 f"(expected {SCENE_SCHEMA_VERSION})")
    unknown = set(d) - _SCENE_KEYS
    if unknown:
        raise ConfigurationError(f"unknown scene fields: {sorted(unknown)}")
    try:
        statics = tuple((_number(r, "range_mm"), _number(r, "gain"))
                        for r in d.get("static_reflectors", [{"range_mm": r, "gain": g} for r, g in DEFAULT_STATICS]))
        finger = None
        if d.get("finger") is not None:
            f = d["finger"]
            finger = Finger(_number(f, "start_range_mm"), _number(f, "gain", FINGER_GAIN),
                            Trajectory.from_dict(f["trajectory"]))
        walker = None
        if d.get("walker") is not None:
            w = {k: _number(d["walker"], k) for k in d["walker"]}
            walker = Walker(**w)
        snr = None if d.get("noise_snr_db", 0.0) is None else _number(d, "noise_snr_db", CLEAN_SNR_DB)
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigurationError("scene seed must be a non-negative integer")
        scene = SceneConfig(statics, finger, snr, walker, seed)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigurationError(f"malformed scene: {exc!r}") from exc
    duration = d.get("duration_s")
    return scene, None if duration is None else _number(d, "duration_s")


def scene_to_dict(scene: SceneConfig, duration: float | None = None) -> dict:
    d = {
        "schema_version": SCENE_SCHEMA_VERSION,
        "seed": scene.seed,
        "static_reflectors": [{"range_mm": r, "gain": g} for r, g in scene.static_reflectors],
        "finger": None,
        "noise_snr_db": scene.noise_snr_db,
        "walker": None,
    }
    if scene.finger is not None:
        d["finger"] = {"start_range_mm": scene.finger.start_range, "gain": scene.finger.gain,
                       "trajectory": scene.finger.trajectory.to_dict()}
    if scene.walker is not None:
        d["walker"] = dict(scene.walker.__dict__)
    if duration is not None:
        d["duration_s"] = duration
    return d


# -- stage evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class StageResult:
    trial: StageTrial
    measured: float  # mm, cursor travel over the measured move
    error: float  # mm, |measured - truth|
    max_frame_seconds: float


def evaluate_stage_trial(trial: StageTrial, config: SonarConfig = SonarConfig()) -> StageResult:
    """Synthesize one stage trial, track it, and score the measured move.

    Travel is read between the last cursor update before the move starts and
    the final update, when the stage has been at rest long enough for the
    smoothing filter to settle.
    """
    rec = synthesize_echo(trial.scene, config)
    tracker = Tracker(config)
    n = config.frame_len
    times, pos = [], []
    worst = 0.0
    for k in range(len(rec.audio) // n):
        c = tracker.track_frame(AudioFrame(rec.audio[k * n:(k + 1) * n], k * config.frame_duration))
        worst = max(worst, tracker.last_frame_seconds)
        times.append(c.time)
        pos.append(c.position)
    t = np.asarray(times)
    x = np.asarray(pos)
    i = max(int(np.searchsorted(t, trial.measure_start, side="right")) - 1, 0)
    measured = float(x[-1] - x[i])
    return StageResult(trial, measured, abs(measured - trial.movement), worst)
