"""Pointing-study protocols and ISO 9241-9 style metrics.

Two task kinds are supported: a serial binary task (two targets, six
alternating selections per trial) and a three-target sequence task (four
selections per trial).  Metrics use effective width and amplitude:
``ID_e = log2(A_e / W_e + 1)`` with ``W_e = 4.133 * SD`` of the signed
endpoint deviations.  Movement time is the interval between consecutive
selections, so the first selection of every trial (which starts from the
rest position rather than a previous target) carries no movement time and is
left out of all metrics.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .triggers import METHODS, Target, check_targets

DISPLAY_MM = 37.3
STUDY1_WIDTHS = (3.0, 6.0, 9.0)
STUDY1_AMPLITUDES = (12.0, 15.0)
STUDY1_SELECTIONS = 6
STUDY1_BLOCKS = 4
STUDY2_W = 6.0
STUDY2_A = 12.0
STUDY2_SELECTIONS = 4
STUDY2_TRIALS_PER_BLOCK = 6
STUDY2_BLOCKS = 5
WE_FACTOR = 4.133
WE_FLOOR = 0.1
MOVES = ("repeat", "adjacent", "non_adjacent")


@dataclass(frozen=True)
class TaskSpec:
    kind: str  # serial_binary | multi_three
    W: float
    A: float
    sequence: tuple[int, ...]  # target id per selection
    start: float = 0.0  # cursor rest position (screen left)

    def __post_init__(self):
        if self.kind not in ("serial_binary", "multi_three"):
            raise ConfigurationError(f"unknown task kind {self.kind!r}")
        if not (self.W > 0 and self.A > 0):
            raise ConfigurationError("W and A must be positive")
        n = len(self.targets)
        if any(not 0 <= k < n for k in self.sequence):
            raise ConfigurationError("sequence refers to a missing target")
        lo = min(g.left for g in self.targets)
        hi = max(g.right for g in self.targets)
        if lo < 0 or hi > DISPLAY_MM:
            raise ConfigurationError(f"targets do not fit the {DISPLAY_MM} mm display")
        check_targets(self.targets)

    @property
    def selections_per_trial(self) -> int:
        return len(self.sequence)

    @property
    def targets(self) -> tuple[Target, ...]:
        c = DISPLAY_MM / 2
        if self.kind == "serial_binary":
            centers = (c - self.A / 2, c + self.A / 2)
        else:
            centers = (c - self.A, c, c + self.A)
        return tuple(Target(i, x, self.W) for i, x in enumerate(centers))

    def to_dict(self):
        return {"kind": self.kind, "W": self.W, "A": self.A, "sequence": list(self.sequence)}


@dataclass(frozen=True)
class Selection:
    target_id: int  # the highlighted target
    endpoint: float  # selection coordinate, mm
    t_start: float
    t_select: float
    error: bool
    re_entries: int = 0
    selected_id: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.endpoint):
            raise ContractViolation("selection endpoint must be finite")
        if not self.t_select > self.t_start:
            raise ContractViolation("t_select must follow t_start")


@dataclass
class TrialRecord:
    task: TaskSpec
    method: str
    haptic: bool = False
    selections: list = field(default_factory=list)
    block: int = 0
    practice: bool = False
    missing: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")


# -- protocol -------------------------------------------------------------------

def serial_binary_task(W: float, A: float, selections: int = STUDY1_SELECTIONS) -> TaskSpec:
    return TaskSpec("serial_binary", W, A, tuple(k % 2 for k in range(selections)))


def make_study1_block(rng: np.random.Generator, reps: int = 2) -> list[TaskSpec]:
    """Every (W, A) combination ``reps`` times, in random order."""
    combos = [(w, a) for w in STUDY1_WIDTHS for a in STUDY1_AMPLITUDES] * reps
    order = rng.permutation(len(combos))
    return [serial_binary_task(*combos[i]) for i in order]


def make_study1_session(seed: int, blocks: int = STUDY1_BLOCKS) -> list[tuple[int, bool, TaskSpec]]:
    """(block, practice, task) for one method; the first block is practice."""
    rng = np.random.default_rng(seed)
    return [(b, b == 0, task) for b in range(blocks) for task in make_study1_block(rng)]


def move_kind(a: int, b: int) -> str:
    d = abs(a - b)
    return MOVES[min(d, 2)]


def valid_study2_sequences(start: int) -> list[tuple[int, ...]]:
    """All 4-selection sequences from ``start`` with one repeat, one adjacent, one non-adjacent move.

    Brute force over every target sequence, so it doubles as the reference
    set for the generator.
    """
    out = []
    for rest in itertools.product(range(3), repeat=3):
        seq = (start,) + rest
        kinds = sorted(move_kind(a, b) for a, b in zip(seq, seq[1:]))
        if kinds == sorted(MOVES):
            out.append(seq)
    return out


def make_study2_trial(seed_or_rng) -> TaskSpec:
    """Random first target, then a uniformly drawn valid continuation."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    start = int(rng.integers(0, 3))
    options = valid_study2_sequences(start)
    seq = options[int(rng.integers(0, len(options)))]
    return TaskSpec("multi_three", STUDY2_W, STUDY2_A, seq)


def make_study2_session(seed: int, blocks: int = STUDY2_BLOCKS,
                        trials: int = STUDY2_TRIALS_PER_BLOCK) -> list[tuple[int, bool, TaskSpec]]:
    rng = np.random.default_rng(seed)
    return [(b, False, make_study2_trial(rng)) for b in range(blocks) for _ in range(trials)]


# -- metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveId:
    id_e: float
    w_e: float
    a_e: float
    degenerate: bool = False


def effective_id(amplitudes: Sequence[float], deviations: Sequence[float]) -> EffectiveId:
    """ID_e from actual movement amplitudes and signed endpoint deviations.

    ``W_e`` uses the sample standard deviation; zero spread is floored at
    0.1 mm and flagged.
    """
    amps = np.asarray(amplitudes, dtype=np.float64)
    dev = np.asarray(deviations, dtype=np.float64)
    if len(dev) < 2 or len(amps) != len(dev):
        raise ContractViolation("effective ID needs at least two selections")
    sd = float(np.std(dev, ddof=1))
    w_e = WE_FACTOR * sd
    degenerate = w_e < WE_FLOOR
    if degenerate:
        w_e = WE_FLOOR
    a_e = float(np.mean(amps))
    return EffectiveId(math.log2(a_e / w_e + 1.0), w_e, a_e, degenerate)


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    r2: float

    def predict(self, id_e):
        return self.a + self.b * np.asarray(id_e, dtype=np.float64)


def fit_fitts(points: Sequence[tuple[float, float]]) -> FitResult | None:
    """OLS of MT on ID_e; ``None`` with fewer than 3 points or no spread in ID_e."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        return None
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx <= 1e-12 * max(1.0, float((x * x).sum())):
        return None
    b = float(((x - xm) * (y - ym)).sum() / sxx)
    a = float(ym - b * xm)
    ss_res = float(((y - a - b * x) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return FitResult(a, b, r2)


# printed models (a s, b s/bit, R^2) for the binary task
PUBLISHED_MODELS = {
    "double_crossing": FitResult(0.065, 0.475, 0.98),
    "dwell": FitResult(0.47, 0.461, 0.94),
    "pinch": FitResult(0.021, 1.234, 0.90),
}


@dataclass(frozen=True)
class Movement:
    """One measured selection, relative to the previous one."""

    method: str
    haptic: bool
    W: float
    A: float
    amplitude: float  # actual distance covered along the task axis
    deviation: float  # endpoint minus target centre, positive = overshoot
    mt: float
    error: bool
    re_entries: int
    kind: str  # serial_binary / multi_three
    move: str  # repeat / adjacent / non_adjacent (binary moves are adjacent)


def movements(record: TrialRecord) -> list[Movement]:
    """Per-selection measures, skipping the first selection of the trial."""
    if record.missing:
        return []
    targets = record.task.targets
    out = []
    sel = record.selections
    for prev, cur in zip(sel, sel[1:]):
        c0 = targets[prev.target_id].center
        c1 = targets[cur.target_id].center
        direction = math.copysign(1.0, c1 - c0) if c1 != c0 else 0.0
        if direction == 0.0:
            # repeat selection: no task axis, measure along the approach
            direction = math.copysign(1.0, cur.endpoint - prev.endpoint) if cur.endpoint != prev.endpoint else 1.0
        out.append(Movement(
            record.method, record.haptic, record.task.W, record.task.A,
            (cur.endpoint - prev.endpoint) * direction,
            (cur.endpoint - c1) * direction,
            cur.t_select - prev.t_select,
            cur.error, cur.re_entries, record.task.kind,
            move_kind(prev.target_id, cur.target_id) if record.task.kind == "multi_three" else "adjacent",
        ))
    return out


@dataclass(frozen=True)
class CellSummary:
    W: float
    A: float
    n: int
    id_e: float
    w_e: float
    a_e: float
    mt: float
    tp: float
    er: float
    tre: float
    degenerate: bool


@dataclass
class FittsSummary:
    method: str
    haptic: bool
    n: int
    TP: float  # mean of per-(W, A) throughputs
    TP_pooled: float  # mean over selections of ID_e(cell) / MT
    MT: float
    ER: float  # percent
    TRE: float  # re-entries per trial
    model: FitResult | None
    cells: list = field(default_factory=list)
    best_cell: tuple | None = None
    missing: int = 0

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("method", "haptic", "n", "TP", "TP_pooled", "MT", "ER", "TRE", "missing")}
        d["model"] = None if self.model is None else {"a": self.model.a, "b": self.model.b, "r2": self.model.r2}
        d["cells"] = [c.__dict__.copy() for c in self.cells]
        d["best_cell"] = None if self.best_cell is None else list(self.best_cell)
        return d


def _cell(W, A, ms: list[Movement]) -> CellSummary | None:
    # throughput only over genuine movements (repeat selections have no amplitude)
    moving = [m for m in ms if m.move != "repeat"]
    mt = float(np.mean([m.mt for m in ms]))
    er = 100.0 * float(np.mean([m.error for m in ms]))
    tre = float(np.mean([m.re_entries for m in ms]))
    if len(moving) >= 2:
        eid = effective_id([m.amplitude for m in moving], [m.deviation for m in moving])
        mt_moving = float(np.mean([m.mt for m in moving]))
        return CellSummary(W, A, len(ms), eid.id_e, eid.w_e, eid.a_e, mt, eid.id_e / mt_moving, er, tre,
                           eid.degenerate)
    return CellSummary(W, A, len(ms), math.nan, math.nan, math.nan, mt, math.nan, er, tre, False)


def summarize(records: Sequence[TrialRecord], include_practice: bool = False) -> list[FittsSummary]:
    """One summary per (method, haptic), each with a per-(W, A) breakdown.

    Practice blocks are dropped unless asked for; cells without data are
    omitted rather than reported as zero.
    """
    if not records:
        raise ContractViolation("summarize needs at least one trial record")
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        if r.practice and not include_practice:
            continue
        groups.setdefault((r.method, r.haptic), []).append(r)
    out = []
    for (method, haptic), recs in sorted(groups.items(), key=lambda kv: (METHODS.index(kv[0][0]), kv[0][1])):
        ms = [m for r in recs for m in movements(r)]
        n_missing = sum(r.missing for r in recs)
        by_cell: dict[tuple, list[Movement]] = {}
        for m in ms:
            by_cell.setdefault((m.W, m.A), []).append(m)
        cells = [c for key in sorted(by_cell) if (c := _cell(*key, by_cell[key])) is not None]
        tps = [c.tp for c in cells if math.isfinite(c.tp)]
        tp = float(np.mean(tps)) if tps else math.nan
        cell_id = {(c.W, c.A): c.id_e for c in cells}
        pooled = [cell_id[(m.W, m.A)] / m.mt for m in ms if m.move != "repeat" and math.isfinite(cell_id[(m.W, m.A)])]
        model = fit_fitts([(c.id_e, c.mt) for c in cells if math.isfinite(c.id_e)])
        per_trial_tre = [sum(s.re_entries for s in r.selections[1:]) for r in recs if not r.missing]
        best = None
        scored = [c for c in cells if math.isfinite(c.tp)]
        if scored:
            low_er = min(c.er for c in scored)
            pick = max((c for c in scored if c.er <= low_er + 2.0), key=lambda c: c.tp)
            best = (pick.W, pick.A)
        out.append(FittsSummary(
            method, haptic, len(ms), tp,
            float(np.mean(pooled)) if pooled else math.nan,
            float(np.mean([m.mt for m in ms])) if ms else math.nan,
            100.0 * float(np.mean([m.error for m in ms])) if ms else math.nan,
            float(np.mean(per_trial_tre)) if per_trial_tre else math.nan,
            model, cells, best, n_missing,
        ))
    return out
