"""Selection triggers: double-crossing, dwell and IMU pinch.

Each machine consumes the 25 Hz cursor stream one state at a time and emits
:class:`TriggerEvent` records.  Between two cursor samples the cursor is taken
to move linearly, so edge crossings get interpolated times rather than frame
times.  Target intervals are closed: a cursor exactly on an edge is inside.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sps

from . import kernels
from .errors import ConfigurationError, ContractViolation

METHODS = ("double_crossing", "dwell", "pinch")
EVENT_KINDS = ("enter", "exit", "select", "cancel", "error_select", "haptic_pulse")
OFFSETS_MS = (0, 40, 80, 120, 160, 200)

ENTER_PULSE = (10.0, 0.5)
SELECT_PULSE = (20.0, 1.0)


@dataclass(frozen=True)
class Target:
    id: int
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"target {self.id}: width must be positive")
        if not math.isfinite(self.center):
            raise ConfigurationError(f"target {self.id}: center must be finite")

    @property
    def left(self) -> float:
        return self.center - 0.5 * self.width

    @property
    def right(self) -> float:
        return self.center + 0.5 * self.width

    def contains(self, x: float) -> bool:
        return self.left <= x <= self.right


def check_targets(targets: Sequence[Target]) -> tuple[Target, ...]:
    """Sort targets left to right; overlapping intervals are a configuration error.

    Targets that only touch at an edge are allowed.
    """
    ordered = tuple(sorted(targets, key=lambda g: g.center))
    ids = [g.id for g in ordered]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("target ids must be unique")
    for a, b in zip(ordered, ordered[1:]):
        if a.right > b.left:
            raise ConfigurationError(f"targets {a.id} and {b.id} overlap")
    return ordered


def target_at(targets: Sequence[Target], x: float) -> Target | None:
    for g in targets:
        if g.contains(x):
            return g
    return None


@dataclass(frozen=True)
class TriggerEvent:
    kind: str
    method: str
    time: float
    coordinate: float
    target_id: int | None = None
    haptic: tuple[float, float] | None = None
    edge: str | None = None  # "left"/"right" for enter and exit

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ContractViolation(f"unknown event kind {self.kind!r}")
        if self.method not in METHODS:
            raise ContractViolation(f"unknown method {self.method!r}")
        if not (math.isfinite(self.coordinate) and math.isfinite(self.time)):
            raise ContractViolation("event coordinate and time must be finite")
        if self.haptic is not None:
            ms, level = self.haptic
            if not (ms > 0 and 0 < level <= 1):
                raise ContractViolation("haptic pulse needs duration > 0 and intensity in (0, 1]")


def segment_crossings(targets: Sequence[Target], t0: float, x0: float, t1: float, x1: float):
    """Edge crossings of the straight move ``(t0, x0) -> (t1, x1)``, in time order.

    Yields ``(kind, target, edge, time, coordinate)`` with kind enter/exit.
    Only the interval ``(t0, t1]`` is considered, so a cursor that starts a
    step already inside a target produces no enter for it.
    """
    if x1 == x0:
        return []
    dx = x1 - x0
    out = []
    for g in targets:
        a_in = g.contains(x0)
        b_in = g.contains(x1)
        lo, hi = min(x0, x1), max(x0, x1)
        if hi < g.left or lo > g.right:
            continue
        if dx > 0:
            near, near_x, far, far_x = "left", g.left, "right", g.right
        else:
            near, near_x, far, far_x = "right", g.right, "left", g.left
        if not a_in:
            s = (near_x - x0) / dx
            out.append((t0 + s * (t1 - t0), "enter", g, near, near_x))
        if not b_in:
            # leaves through the far edge in the direction of motion
            s = (far_x - x0) / dx
            out.append((t0 + s * (t1 - t0), "exit", g, far, far_x))
    out.sort(key=lambda e: (e[0], 0 if e[1] == "exit" else 1))
    return [(kind, g, edge, t, x) for t, kind, g, edge, x in out]


class _Machine:
    method = ""

    def __init__(self, targets: Sequence[Target]):
        self.targets = check_targets(targets)
        self.prev: tuple[float, float] | None = None
        self.inside: Target | None = None

    def _event(self, kind, t, x, target=None, edge=None):
        return TriggerEvent(kind, self.method, float(t), float(x),
                            None if target is None else target.id, None, edge)

    def _advance(self, t: float, x: float):
        """Validate time order and return the crossings since the last sample."""
        if not (math.isfinite(t) and math.isfinite(x)):
            raise ContractViolation("cursor samples must be finite")
        if self.prev is None:
            self.prev = (t, x)
            self.inside = target_at(self.targets, x)
            return [], True
        t0, x0 = self.prev
        if not t > t0:
            raise ContractViolation(f"cursor time must increase (got {t} after {t0})")
        self.prev = (t, x)
        return segment_crossings(self.targets, t0, x0, t, x), False


class DoubleCrossing(_Machine):
    """Enter a target across an edge, turn around inside, leave by the same edge.

    Leaving by the other edge cancels.  The selection coordinate is the
    cursor position at the velocity zero-crossing: per-frame velocities are
    placed at frame midpoints and the sign change between them is located by
    linear interpolation.  If no sign change was sampled (the cursor stopped
    dead), the deepest sampled position is used.
    """

    method = "double_crossing"

    def __init__(self, targets: Sequence[Target]):
        super().__init__(targets)
        self.candidate: Target | None = None
        self.entry_edge: str | None = None
        self.turn: float | None = None
        self.extreme: float | None = None
        self._v: tuple[float, float] | None = None  # (mid-time, velocity), last non-zero
        self._pp: tuple[float, float] | None = None  # sample before ``prev``

    def _position_at(self, tz, t0, x0, t1, x1):
        if tz >= t0:
            return x0 + (x1 - x0) * (tz - t0) / (t1 - t0)
        if self._pp is None or tz <= self._pp[0]:
            return x0  # the cursor sat still across the turn
        tp, xp = self._pp
        return xp + (x0 - xp) * (tz - tp) / (t0 - tp)

    def _velocity(self, t0, x0, t1, x1):
        if x1 == x0:
            return
        v = (x1 - x0) / (t1 - t0)
        tm = 0.5 * (t0 + t1)
        if self._v is not None and self.candidate is not None and (self._v[1] > 0) != (v > 0):
            ta, va = self._v
            tz = ta + (tm - ta) * va / (va - v)
            self.turn = self._position_at(tz, t0, x0, t1, x1)
        self._v = (tm, v)

    def _deeper(self, x) -> bool:
        if self.extreme is None:
            return True
        return x > self.extreme if self.entry_edge == "left" else x < self.extreme

    def step(self, time: float, position: float, highlighted: int | None = None) -> list[TriggerEvent]:
        prev = self.prev
        crossings, first = self._advance(time, position)
        if first:
            return []
        t0, x0 = prev
        # a turn at the previous sample belongs to a target that was highlighted then
        self._velocity(t0, x0, time, position)
        events = []
        for kind, g, edge, tc, xc in crossings:
            if kind == "enter":
                self.inside = g
                self.candidate, self.entry_edge = g, edge
                self.turn, self.extreme = None, xc
                events.append(self._event("enter", tc, xc, g, edge))
            else:
                self.inside = None
                events.append(self._event("exit", tc, xc, g, edge))
                if g is self.candidate:
                    events.append(self._resolve(g, edge, tc, xc, highlighted))
        if self.candidate is not None and self.candidate.contains(position) and self._deeper(position):
            self.extreme = position
        self._pp = (t0, x0)
        return events

    def _resolve(self, g, edge, tc, xc, highlighted):
        coord = self.turn if self.turn is not None else self.extreme
        same = edge == self.entry_edge
        self.candidate, self.entry_edge, self.turn, self.extreme = None, None, None, None
        if not same:
            return self._event("cancel", tc, xc, g, edge)
        if highlighted is not None and highlighted != g.id:
            return self._event("error_select", tc, coord, g, edge)
        return self._event("select", tc, coord, g, edge)


class Dwell(_Machine):
    """Select a target after ``dwell_ms`` of continuous residence.

    Leaving resets the timer (at frame granularity, since exits are only
    seen through cursor samples).  After a selection the timer restarts, so
    staying put selects the same target again one dwell later.
    """

    method = "dwell"

    def __init__(self, targets: Sequence[Target], dwell_ms: float = 500.0):
        super().__init__(targets)
        if not dwell_ms > 0:
            raise ConfigurationError("dwell time must be positive")
        self.dwell = dwell_ms / 1000.0
        self.since: float | None = None
        self.entries: dict[int, int] = {}
        self.re_entries: dict[int, int] = {}

    def _fire_until(self, t_end, t0, x0, t1, x1, events):
        while self.inside is not None and self.since is not None and self.since + self.dwell <= t_end + 1e-12:
            ts = self.since + self.dwell
            xs = x0 if t1 == t0 else x0 + (x1 - x0) * (ts - t0) / (t1 - t0)
            events.append(self._event("select", ts, xs, self.inside))
            self.entries[self.inside.id] = 0
            self.re_entries[self.inside.id] = 0
            self.since = ts

    def step(self, time: float, position: float, highlighted: int | None = None) -> list[TriggerEvent]:
        prev = self.prev
        crossings, first = self._advance(time, position)
        if first:
            if self.inside is not None:
                self.since = time
                self.entries[self.inside.id] = 1
            return []
        t0, x0 = prev
        events = []
        for kind, g, edge, tc, xc in crossings:
            self._fire_until(tc, t0, x0, time, position, events)
            if kind == "enter":
                self.inside, self.since = g, tc
                n = self.entries.get(g.id, 0) + 1
                self.entries[g.id] = n
                if n > 1:
                    self.re_entries[g.id] = self.re_entries.get(g.id, 0) + 1
                events.append(self._event("enter", tc, xc, g, edge))
            else:
                self.inside, self.since = None, None
                events.append(self._event("exit", tc, xc, g, edge))
        self._fire_until(time, t0, x0, time, position, events)
        return events


# -- pinch --------------------------------------------------------------------

IMU_RATE = 100.0
HIGHPASS_HZ = 15.0
DEFAULT_PINCH_THRESHOLD = 2.5  # m/s^2, calibrated on the synthetic pinch corpus


def highpass_coefficients(cutoff: float = HIGHPASS_HZ, rate: float = IMU_RATE):
    b, a = sps.butter(2, cutoff, btype="highpass", fs=rate)
    return np.ascontiguousarray(b, dtype=np.float64), np.ascontiguousarray(a, dtype=np.float64)


@dataclass
class PinchDetectorState:
    threshold: float = DEFAULT_PINCH_THRESHOLD
    refractory: float = 0.2
    cutoff: float = HIGHPASS_HZ
    b: np.ndarray = field(default=None, repr=False)
    a: np.ndarray = field(default=None, repr=False)
    zi: np.ndarray = field(default=None, repr=False)
    last: np.ndarray = field(default=None, repr=False)  # [time of last detection]
    primed: bool = False

    def __post_init__(self):
        if not self.threshold > 0:
            raise ContractViolation("pinch threshold must be positive")
        if self.refractory < 0:
            raise ContractViolation("refractory period must be non-negative")
        if self.b is None:
            self.b, self.a = highpass_coefficients(self.cutoff)
        if self.zi is None:
            self.zi = np.zeros((3, 2))
        if self.last is None:
            self.last = np.array([math.nan])

    def prime(self, first_sample):
        """Start the filter in steady state for ``first_sample`` (no start-up transient)."""
        zi1 = sps.lfilter_zi(self.b, self.a)
        self.zi[:] = np.outer(np.asarray(first_sample, dtype=np.float64), zi1)
        self.primed = True


def pinch_detect_block(state: PinchDetectorState, samples, times) -> tuple[np.ndarray, np.ndarray]:
    """Run the detector over a block; returns (detection times, high-passed magnitude)."""
    acc = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    t = np.ascontiguousarray(times, dtype=np.float64)
    if len(t) != len(acc):
        raise ContractViolation("IMU samples and times differ in length")
    n = len(t)
    if n == 0:
        return np.empty(0), np.empty(0)
    if not state.primed:
        state.prime(acc[0])
    mag = np.empty(n)
    det = np.empty(n)
    k = kernels.hp_threshold_detect(np.ascontiguousarray(acc[:, 0]), np.ascontiguousarray(acc[:, 1]),
                                    np.ascontiguousarray(acc[:, 2]), t, state.b, state.a, state.zi,
                                    state.last, state.threshold, state.refractory, mag, det)
    return det[:k].copy(), mag


def pinch_detect(state: PinchDetectorState, sample, time: float) -> float | None:
    """Single-sample form of :func:`pinch_detect_block`."""
    det, _ = pinch_detect_block(state, np.asarray(sample, dtype=np.float64).reshape(1, 3), [time])
    return float(det[0]) if len(det) else None


def detect_pinches(imu, threshold: float = DEFAULT_PINCH_THRESHOLD, refractory: float = 0.2) -> np.ndarray:
    """Detection times for a whole :class:`~sonarpoint.simulate.ImuStream`."""
    st = PinchDetectorState(threshold, refractory)
    det, _ = pinch_detect_block(st, imu.samples, imu.times)
    return det


def score_detections(detections, truth, window: tuple[float, float] = (-0.02, 0.1)):
    """Match detections to true pinch onsets; returns (hits, misses, false positives).

    A detection matches an onset when it falls within ``window`` of it; each
    onset and each detection is used at most once.
    """
    det = sorted(float(d) for d in detections)
    used = [False] * len(det)
    hits = 0
    for onset in sorted(float(x) for x in truth):
        for i, d in enumerate(det):
            if not used[i] and window[0] <= d - onset <= window[1]:
                used[i] = True
                hits += 1
                break
    misses = len(truth) - hits
    return hits, misses, used.count(False)


class PinchTrigger(_Machine):
    """Select whatever lies under the cursor ``offset_ms`` before each pinch."""

    method = "pinch"

    def __init__(self, targets: Sequence[Target], offset_ms: float = 0.0, history_s: float = 1.0):
        super().__init__(targets)
        if offset_ms not in OFFSETS_MS:
            raise ContractViolation(f"offset must be one of {OFFSETS_MS} ms")
        if offset_ms / 1000.0 > history_s:
            raise ContractViolation("offset exceeds the cursor history buffer")
        self.offset = offset_ms / 1000.0
        self.history_s = history_s
        self.history: deque = deque()

    def step(self, time: float, position: float, highlighted: int | None = None) -> list[TriggerEvent]:
        prev = self.prev
        crossings, first = self._advance(time, position)
        self.history.append((time, position))
        while self.history and self.history[0][0] < time - self.history_s - 0.1:
            self.history.popleft()
        if first:
            return []
        events = []
        for kind, g, edge, tc, xc in crossings:
            self.inside = g if kind == "enter" else None
            events.append(self._event(kind, tc, xc, g, edge))
        return events

    def position_at(self, t: float) -> float:
        if not self.history:
            raise ContractViolation("no cursor history yet")
        ts = [h[0] for h in self.history]
        if t < ts[0] - 1e-9:
            raise ContractViolation("offset reaches past the cursor history buffer")
        xs = [h[1] for h in self.history]
        return float(np.interp(t, ts, xs))

    def on_detection(self, time: float, highlighted: int | None) -> TriggerEvent:
        x = self.position_at(time - self.offset)
        g = target_at(self.targets, x)
        if g is not None and (highlighted is None or g.id == highlighted):
            return self._event("select", time, x, g)
        return self._event("error_select", time, x, g)


def haptic_policy(events: Iterable[TriggerEvent], enabled: bool = True) -> list[TriggerEvent]:
    """Insert a pulse after every enter (10 ms, half) and select (20 ms, full)."""
    out = []
    for ev in events:
        out.append(ev)
        if not enabled:
            continue
        pulse = ENTER_PULSE if ev.kind == "enter" else SELECT_PULSE if ev.kind == "select" else None
        if pulse is not None:
            out.append(TriggerEvent("haptic_pulse", ev.method, ev.time, ev.coordinate, ev.target_id, pulse))
    return out


def merge_streams(cursor, detections):
    """Time-order cursor states and IMU detections; IMU wins ties.

    ``cursor`` items need a ``time`` attribute; detections are plain times.
    Yields ``("imu", t)`` and ``("cursor", state)``.
    """
    items = [(float(t), 0, i, ("imu", float(t))) for i, t in enumerate(detections)]
    items += [(float(c.time), 1, i, ("cursor", c)) for i, c in enumerate(cursor)]
    items.sort(key=lambda r: r[:3])
    return [r[3] for r in items]


def run_trigger(method: str, targets: Sequence[Target], cursor, detections=(), highlighted=None,
                dwell_ms: float = 500.0, offset_ms: float = 0.0, haptics: bool = False) -> list[TriggerEvent]:
    """Offline replay of one method over a cursor trace (and pinch detections)."""
    if method == "double_crossing":
        m = DoubleCrossing(targets)
    elif method == "dwell":
        m = Dwell(targets, dwell_ms)
    elif method == "pinch":
        m = PinchTrigger(targets, offset_ms)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    events = []
    for kind, item in merge_streams(cursor, detections):
        if kind == "imu":
            if method == "pinch" and m.history:
                events.append(m.on_detection(item, highlighted))
        else:
            events.extend(m.step(item.time, item.position, highlighted))
    return haptic_policy(events, haptics)


# -- offset correction ---------------------------------------------------------

@dataclass(frozen=True)
class PinchSample:
    """One pinch selection from a corpus: enough to re-score it at any offset."""

    detection: float
    highlighted: int
    targets: tuple[Target, ...]
    trace_t: np.ndarray
    trace_x: np.ndarray

    def _target(self) -> Target:
        for g in self.targets:
            if g.id == self.highlighted:
                return g
        raise ContractViolation(f"highlighted target {self.highlighted} is not in the layout")

    def hit(self, offset_ms: float) -> bool:
        t = self.detection - offset_ms / 1000.0
        if t < self.trace_t[0]:
            raise ContractViolation("offset reaches past the recorded cursor trace")
        x = float(np.interp(t, self.trace_t, self.trace_x))
        g = target_at(self.targets, x)
        return g is not None and g.id == self.highlighted

    def arrival(self) -> float:
        """Time the cursor last entered the highlighted target before the detection.

        ``-inf`` if it was inside for the whole trace, ``nan`` if it is not
        inside at the detection.
        """
        g = self._target()
        t, x = self.trace_t, self.trace_x
        td = self.detection
        if not g.contains(float(np.interp(td, t, x))):
            return math.nan
        k = int(np.searchsorted(t, td, side="right")) - 1
        t1, x1 = td, float(np.interp(td, t, x))
        while k >= 0:
            t0, x0 = float(t[k]), float(x[k])
            if not g.contains(x0):
                edge = g.left if x0 < g.left else g.right
                return t0 + (t1 - t0) * (edge - x0) / (x1 - x0)
            t1, x1 = t0, x0
            k -= 1
        return -math.inf


@dataclass(frozen=True)
class OffsetRow:
    offset_ms: float
    error_rate: float
    corrected_rate: float  # share of zero-offset errors that become hits
    introduced_rate: float  # share of zero-offset hits that become errors
    premature_rate: float  # share of zero-offset hits whose shifted point precedes the cursor's arrival
    net_gain: int  # corrected minus introduced, in selections


def offset_sweep(samples: Sequence[PinchSample], offsets=OFFSETS_MS):
    """Re-score a pinch corpus with the selection point moved back in time.

    Returns the rows and the crossover: the first non-zero offset at which
    newly introduced errors catch up with corrected ones (``None`` if that
    never happens in the swept range).
    """
    if not samples:
        raise ContractViolation("offset sweep needs at least one pinch selection")
    offsets = [float(o) for o in offsets]
    if any(o < 0 for o in offsets) or offsets != sorted(offsets):
        raise ContractViolation("offsets must be non-negative and increasing")
    base = np.array([s.hit(0) for s in samples])
    arrival = np.array([s.arrival() for s in samples])
    det = np.array([s.detection for s in samples])
    n_err = int((~base).sum())
    n_hit = int(base.sum())
    rows = []
    crossover = None
    for off in offsets:
        hit = np.array([s.hit(off) for s in samples])
        corrected = int((~base & hit).sum())
        introduced = int((base & ~hit).sum())
        with np.errstate(invalid="ignore"):
            early = base & (det - off / 1000.0 < arrival)
        rows.append(OffsetRow(off, float((~hit).mean()),
                              corrected / n_err if n_err else 0.0,
                              introduced / n_hit if n_hit else 0.0,
                              int(early.sum()) / n_hit if n_hit else 0.0,
                              corrected - introduced))
        if crossover is None and off > 0 and introduced >= corrected:
            crossover = off
    return rows, crossover
