"""A scripted participant that performs the pointing tasks.

The agent moves a virtual finger with minimum-jerk strokes, watches the
cursor at the 25 Hz frame rate and reacts after a delay, the way a closed
loop pointing model does.  The cursor comes either straight from the finger
(``pipeline="bypass"``) or from synthesized microphone audio run through the
demodulator and tracker (``pipeline="sonar"``).

It is a calibration instrument, not a model of people: parameters are set so
the three triggers land in roughly the right places relative to each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fitts import Selection, TaskSpec, TrialRecord
from .signals import SonarConfig, AudioFrame
from .simulate import (
    BurstShape, CLEAN_SNR_DB, DEFAULT_STATICS, EchoSynth, FINGER_GAIN, Finger, GRAVITY,
    PINCH_NOISE_RMS, PINCH_PEAK_JITTER, SceneConfig, Segment, Trajectory, WRIST_DRIFT_RMS, pinch_burst,
)
from .tracking import Tracker
from .triggers import (
    DEFAULT_PINCH_THRESHOLD, DoubleCrossing, Dwell, PinchDetectorState, PinchSample, PinchTrigger,
    haptic_policy, pinch_detect_block,
)

FRAME_S = 1.0 / 25.0
WARMUP_S = 1.0  # hand settles next to the watch before each trial
REST_RANGE_MM = 20.0  # finger range when the cursor sits at the screen's left edge
MAX_SELECTION_S = 8.0


@dataclass(frozen=True)
class AgentParams:
    reaction_time: float = 0.2  # s, from seeing the cursor to acting on it
    peak_speed: float = 160.0  # mm/s cap for planned strokes
    endpoint_sd_fraction: float = 0.2  # of W, primary stroke
    trigger_latency: float = 0.0  # s, extra pause before committing (pinch steadying)
    pinch_kick_sd: float = 0.15  # mm, spread of the finger slip caused by a pinch
    kick_mean: float = 0.43  # mm
    mt_a: float = 0.12  # s, planned stroke duration = mt_a + mt_b * log2(d / W + 1)
    mt_b: float = 0.14
    endpoint_floor: float = 0.4  # mm, width-independent endpoint noise
    correction_sd_fraction: float = 0.12
    post_select: float = 0.15  # s, median pause after a selection
    post_select_spread: float = 0.3  # log-normal sigma of that pause
    exit_margin: float = 2.0  # mm past the edge when leaving a target (double-crossing)
    endpoint_amp_fraction: float = 0.0  # of stroke length, endpoint noise growing with distance
    hold_drift: float = 0.0  # mm/s, spread of the slow drift while holding still
    latency_spread: float = 0.15  # s, spread of the trigger moment around trigger_latency
    kick_duration: float = 0.03  # s, the slip happens as the fingers make contact

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (isinstance(v, (int, float)) and v >= 0 and math.isfinite(v)):
                raise ConfigurationError(f"agent parameter {k} must be finite and non-negative")
        if self.peak_speed <= 0 or self.kick_duration <= 0:
            raise ConfigurationError("peak_speed and kick_duration must be positive")


# frozen per-method settings
AGENT_DEFAULTS = {
    "double_crossing": AgentParams(endpoint_sd_fraction=0.22, mt_a=0.15, mt_b=0.16, post_select=0.05,
                                   endpoint_amp_fraction=0.05),
    "dwell": AgentParams(endpoint_sd_fraction=0.2, post_select=0.18, post_select_spread=0.25, hold_drift=1.5),
    "pinch": AgentParams(endpoint_sd_fraction=0.2, mt_a=0.35, mt_b=0.22, trigger_latency=0.12, latency_spread=0.2,
                         post_select=0.12, hold_drift=3.5),
}


def _min_jerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s)


@dataclass
class MotorPlan:
    """Piecewise minimum-jerk finger path; pieces never overlap in time.

    ``bumps`` are short displacements added on top of the pieces (the slip a
    pinch causes), so they can land in the middle of a stroke.
    """

    x0: float
    pieces: list = field(default_factory=list)  # (t0, duration, x_from, x_to, stop)
    bumps: list = field(default_factory=list)  # (t0, duration, delta)

    @property
    def end_time(self) -> float:
        return self.pieces[-1][4] if self.pieces else -math.inf

    @property
    def end_position(self) -> float:
        """Where the finger comes to rest once everything planned has run."""
        offset = sum(b[2] for b in self.bumps)
        if not self.pieces:
            return self.x0 + offset
        t0, d, a, b, stop = self.pieces[-1]
        return float(a + (b - a) * _min_jerk((stop - t0) / d)) + offset

    def add(self, t0: float, duration: float, x_to: float):
        """Append a stroke ending at finger position ``x_to``; returns its end time."""
        t0 = max(t0, self.end_time)
        offset = sum(b[2] for b in self.bumps)
        self.pieces.append((t0, duration, self.end_position - offset, float(x_to) - offset, t0 + duration))
        return t0 + duration

    def bump(self, t0: float, duration: float, delta: float):
        self.bumps.append((t0, duration, float(delta)))

    def stop(self, t: float):
        """Freeze the finger at time ``t`` if a piece is still running."""
        if self.pieces and self.pieces[-1][0] < t < self.pieces[-1][4]:
            self.pieces[-1] = self.pieces[-1][:4] + (t,)

    def position(self, t):
        t = np.asarray(t, dtype=np.float64)
        x = np.full(t.shape, self.x0)
        for t0, d, a, b, stop in self.pieces:
            live = t >= t0
            if not live.any():
                break
            x = np.where(live, a + (b - a) * _min_jerk((np.minimum(t, stop) - t0) / d), x)
        for t0, d, delta in self.bumps:
            x = x + delta * _min_jerk((t - t0) / d)
        return x


def stroke_duration(distance: float, W: float, p: AgentParams) -> float:
    d = abs(distance)
    if d == 0:
        return FRAME_S
    fitts = p.mt_a + p.mt_b * math.log2(d / W + 1.0)
    return max(fitts, 1.875 * d / p.peak_speed, FRAME_S)


class _Cursor:
    """Cursor source: ideal (finger = cursor) or the full sonar chain."""

    def __init__(self, pipeline: str, seed: int, config: SonarConfig, start: float, snr_db: float):
        if pipeline not in ("bypass", "sonar"):
            raise ConfigurationError(f"unknown pipeline {pipeline!r}")
        self.pipeline = pipeline
        self.config = config
        self.start = start
        self.delay = config.group_delay / config.sample_rate
        if pipeline == "sonar":
            hold = Trajectory((Segment("hold", 1.0),))
            scene = SceneConfig(DEFAULT_STATICS, Finger(REST_RANGE_MM, FINGER_GAIN, hold), snr_db, None, seed)
            self.synth = EchoSynth(scene, config)
            self.tracker = Tracker(config)

    def frame(self, k: int, plan: MotorPlan) -> tuple[float, float]:
        """Cursor (time, position) after audio frame ``k``."""
        t_state = (k + 1) * FRAME_S - self.delay
        if self.pipeline == "bypass":
            return t_state, float(plan.position(t_state))
        cfg = self.config
        n = cfg.frame_len
        t = np.arange(k * n, (k + 1) * n) / cfg.sample_rate
        rng = REST_RANGE_MM + plan.position(t) - self.start
        audio = self.synth.render(rng)
        c = self.tracker.track_frame(AudioFrame(audio, k * n / cfg.sample_rate))
        return c.time, c.position

    def recenter(self, position: float):
        if self.pipeline == "sonar":
            self.tracker.recenter(position)


@dataclass
class TrialRun:
    record: TrialRecord
    events: list
    trace_t: np.ndarray
    trace_x: np.ndarray
    pinch_samples: list
    plan: MotorPlan


def run_agent(task: TaskSpec, method: str, params: AgentParams | None = None, pipeline: str = "bypass",
              haptic: bool = False, seed: int = 0, offset_ms: float = 0.0,
              config: SonarConfig = SonarConfig(), snr_db: float = CLEAN_SNR_DB,
              pinch_threshold: float = DEFAULT_PINCH_THRESHOLD) -> TrialRun:
    """Perform one trial and log every selection."""
    if method not in AGENT_DEFAULTS:
        raise ConfigurationError(f"unknown method {method!r}")
    p = params if params is not None else AGENT_DEFAULTS[method]
    rng = np.random.default_rng(seed)
    targets = task.targets
    x_start = task.start
    plan = MotorPlan(x_start)
    # settle-in gesture: a short stroke toward the watch and back, which also
    # gives the static-vector estimator its first lock
    plan.add(0.0, 0.3, x_start - 12.0)
    plan.add(0.3, 0.3, x_start)
    cursor = _Cursor(pipeline, seed, config, x_start, snr_db)

    if method == "double_crossing":
        machine = DoubleCrossing(targets)
    elif method == "dwell":
        machine = Dwell(targets)
    elif method == "pinch":
        machine = PinchTrigger(targets, offset_ms)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    detector = PinchDetectorState(pinch_threshold)

    goal = 0
    g = targets[task.sequence[0]]
    selections: list[Selection] = []
    events = []
    entries = 0
    t_goal = WARMUP_S
    next_act = WARMUP_S + p.reaction_time
    attempt = 0
    pinch_times: list[float] = []
    pending_pinch = None  # onset time of an outstanding pinch
    wrist = _WristImu(seed)
    trace_t, trace_x = [], []
    pinch_samples = []
    pinch_meta = []
    last_t = -math.inf
    started = False
    k = 0
    t_limit = WARMUP_S + MAX_SELECTION_S * len(task.sequence)
    missing = False

    def aim_for(x_now):
        frac = p.endpoint_sd_fraction if attempt == 0 else p.correction_sd_fraction
        sd = math.sqrt((frac * task.W) ** 2 + (p.endpoint_amp_fraction * abs(g.center - x_now)) ** 2
                       + p.endpoint_floor ** 2)
        return g.center + rng.normal(0.0, sd)

    def drift(t0, duration):
        if p.hold_drift > 0 and duration > 0:
            plan.add(t0, duration, plan.end_position + rng.normal(0.0, p.hold_drift * duration))

    while goal < len(task.sequence):
        t_state, x = cursor.frame(k, plan)
        k += 1
        if t_state >= WARMUP_S - FRAME_S and not started:
            cursor.recenter(x_start)
            started = True
            continue
        if not started or t_state <= last_t:
            continue
        last_t = t_state
        if t_state > t_limit:
            missing = True
            break
        trace_t.append(t_state)
        trace_x.append(x)

        new = []
        # IMU first at equal times
        if method == "pinch":
            ti, acc = wrist.until(t_state)
            det, _ = pinch_detect_block(detector, acc, ti) if len(ti) else ([], None)
            for td in det:
                if machine.history:
                    ev = machine.on_detection(td, g.id)
                    new.append(ev)
                    pinch_meta.append((td, g.id))
        new.extend(machine.step(t_state, x, g.id))
        resolved = None
        for ev in new:
            events.append(ev)
            if ev.kind == "enter" and ev.target_id == g.id:
                entries += 1
            if resolved is not None:
                continue
            if method == "double_crossing":
                if ev.kind in ("select", "error_select") or (ev.kind == "cancel" and ev.target_id == g.id):
                    resolved = ev
            elif method == "dwell":
                if ev.kind == "select":
                    resolved = ev
            elif ev.kind in ("select", "error_select"):
                resolved = ev
        if resolved is not None:
            err = resolved.kind != "select" or resolved.target_id != g.id
            re_entries = 0 if method == "double_crossing" else max(0, entries - 1)
            t_sel = max(resolved.time, t_goal + 1e-6)
            selections.append(Selection(g.id, resolved.coordinate, t_goal, t_sel, err, re_entries,
                                        resolved.target_id))
            goal += 1
            if goal == len(task.sequence):
                break
            g = targets[task.sequence[goal]]
            entries = 1 if (g.contains(x) and method != "double_crossing") else 0
            t_goal = t_sel
            attempt = 0
            pending_pinch = None
            if method != "double_crossing":
                plan.stop(t_state)  # stop holding once the selection registers
            pause = p.post_select * math.exp(p.post_select_spread * rng.standard_normal())
            next_act = max(t_sel + pause, plan.end_time)
            continue

        if t_state < next_act or t_state < plan.end_time:
            continue
        # the agent looks at the cursor and decides
        if method == "double_crossing":
            next_act = _dc_gesture(plan, t_state, x, g, task, p, aim_for) + p.reaction_time
            attempt += 1
        elif method == "dwell":
            if g.contains(x):
                drift(t_state, 0.5)
                next_act = t_state + 0.5 + p.reaction_time  # wait for the dwell to run out
            else:
                aim = aim_for(x)
                end = plan.add(t_state, stroke_duration(aim - x, task.W, p), plan.end_position + (aim - x))
                next_act = end + p.reaction_time
                attempt += 1
        else:
            if pending_pinch is not None and t_state < pending_pinch + 0.4:
                continue
            if g.contains(x):
                # on target after a missed detection: tap again
                onset = t_state + max(rng.normal(p.trigger_latency, p.latency_spread), 0.06)
            else:
                # the tap is timed to the expected arrival, not to seeing the cursor stop
                aim = aim_for(x)
                end = plan.add(t_state, stroke_duration(aim - x, task.W, p), plan.end_position + (aim - x))
                onset = max(end + rng.normal(p.trigger_latency, p.latency_spread), 0.5 * (t_state + end))
                attempt += 1
            if pinch_times:
                onset = max(onset, pinch_times[-1] + 0.25)
            drift(plan.end_time, onset - p.kick_duration - plan.end_time)
            kick = rng.choice((-1.0, 1.0)) * abs(rng.normal(p.kick_mean, p.pinch_kick_sd))
            plan.bump(onset - p.kick_duration, p.kick_duration, kick)
            pinch_times.append(onset)
            wrist.schedule(onset)
            pending_pinch = onset
            next_act = max(onset + 0.4, plan.end_time)

    tt = np.asarray(trace_t)
    xx = np.asarray(trace_x)
    if method == "pinch":
        for td, gid in pinch_meta:
            if len(tt) and td - 0.2 >= tt[0]:
                pinch_samples.append(PinchSample(td, gid, targets, tt, xx))
    record = TrialRecord(task, method, haptic, selections, seed=seed, missing=missing)
    return TrialRun(record, haptic_policy(events, haptic), tt, xx, pinch_samples, plan)


def _dc_gesture(plan, t, x, g, task, p, aim_for) -> float:
    """Plan in, turn, and back out across the near edge; returns the gesture end time."""
    if g.contains(x):
        # already inside (e.g. after a miss): back out first, then come in again
        edge = g.left if x - g.left < g.right - x else g.right
        out = edge + math.copysign(p.exit_margin, edge - g.center)
        return plan.add(t, stroke_duration(out - x, task.W, p), plan.end_position + (out - x))
    side = -1.0 if x < g.center else 1.0  # which side we come from
    aim = aim_for(x)
    exit_x = g.center + side * (0.5 * task.W + p.exit_margin)
    base = plan.end_position - x  # finger minus cursor
    end = plan.add(t, stroke_duration(aim - x, task.W, p), aim + base)
    return plan.add(end, stroke_duration(exit_x - aim, task.W, p), exit_x + base)


class _WristImu:
    """Incremental 100 Hz wrist accelerometer with pinch bursts scheduled on the fly."""

    rate = 100.0

    def __init__(self, seed: int, noise_rms: float = PINCH_NOISE_RMS, shape: BurstShape | None = None):
        self.rng = np.random.default_rng([seed, 7])
        self.noise_rms = noise_rms
        self.shape = shape if shape is not None else BurstShape(peak_jitter=PINCH_PEAK_JITTER)
        self.drift = [(self.rng.uniform(0.2, 1.5), self.rng.uniform(0, 2 * np.pi)) for _ in range(3)]
        self.bursts = []  # (onset, freq, peak, axis)
        self.n = 0

    def schedule(self, onset: float):
        sh = self.shape
        freq = self.rng.uniform(*sh.freq_range)
        peak = sh.peak * math.exp(sh.peak_jitter * self.rng.standard_normal())
        self.bursts.append((onset, freq, peak, int(self.rng.integers(0, 3))))

    def until(self, t_now: float):
        """Samples from the last call up to ``t_now``; returns (times, samples)."""
        n_end = int(math.floor(t_now * self.rate + 1e-9)) + 1
        if n_end <= self.n:
            return np.empty(0), np.empty((0, 3))
        t = np.arange(self.n, n_end) / self.rate
        acc = self.rng.normal(0.0, self.noise_rms, (len(t), 3))
        acc[:, 2] += GRAVITY
        for k, (f, ph) in enumerate(self.drift):
            acc[:, k] += WRIST_DRIFT_RMS * math.sqrt(2) * np.sin(2 * np.pi * f * t + ph)
        for onset, freq, peak, axis in self.bursts:
            if onset <= t[-1] and onset + 0.5 >= t[0]:
                acc[:, axis] += pinch_burst(t, onset, freq, peak, self.shape.decay)
        self.n = n_end
        return t, acc


def _trial_seed(seed: int, *parts: int) -> int:
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


def run_study1(method: str, seed: int = 0, pipeline: str = "bypass", params: AgentParams | None = None,
               offset_ms: float = 0.0, blocks: int | None = None) -> list[TrialRun]:
    """One participant-method session of the serial binary task (first block is practice)."""
    from .fitts import STUDY1_BLOCKS, make_study1_session

    session = make_study1_session(_trial_seed(seed, 1), blocks if blocks is not None else STUDY1_BLOCKS)
    runs = []
    for i, (block, practice, task) in enumerate(session):
        run = run_agent(task, method, params, pipeline, False, _trial_seed(seed, 2, i), offset_ms)
        run.record.block, run.record.practice = block, practice
        runs.append(run)
    return runs


def run_study2(method: str, haptic: bool = False, seed: int = 0, pipeline: str = "bypass",
               params: AgentParams | None = None, blocks: int | None = None) -> list[TrialRun]:
    """One participant-condition session of the three-target task."""
    from .fitts import STUDY2_BLOCKS, make_study2_session

    session = make_study2_session(_trial_seed(seed, 3), blocks if blocks is not None else STUDY2_BLOCKS)
    runs = []
    for i, (block, practice, task) in enumerate(session):
        run = run_agent(task, method, params, pipeline, haptic, _trial_seed(seed, 4, i, int(haptic)))
        run.record.block, run.record.practice = block, practice
        runs.append(run)
    return runs
