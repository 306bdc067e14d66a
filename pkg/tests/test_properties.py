import math
from dataclasses import dataclass

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sonarpoint.fitts import Selection, TaskSpec, TrialRecord, fit_fitts, serial_binary_task, summarize
from sonarpoint.tracking import CursorState, OneEuroState, one_euro
from sonarpoint.triggers import Target, run_trigger

TARGETS = [Target(0, 10.0, 6.0), Target(1, 22.0, 6.0)]
SETTINGS = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])

positions = st.lists(st.floats(-5.0, 35.0, allow_nan=False), min_size=2, max_size=40)
gaps = st.lists(st.floats(0.005, 0.2), min_size=40, max_size=40)


def _trace(xs, dts):
    t = np.cumsum([0.0] + list(dts[:len(xs) - 1]))
    return [CursorState(float(x), 0.0, float(ti), 1.0) for ti, x in zip(t, xs)]


@SETTINGS
@given(positions, gaps, st.sampled_from([None, 0, 1]))
def test_dwell_never_errs(xs, dts, hl):
    ev = run_trigger("dwell", TARGETS, _trace(xs, dts), highlighted=hl)
    assert all(e.kind != "error_select" for e in ev)


@SETTINGS
@given(positions, gaps)
def test_dwell_selects_only_while_inside(xs, dts):
    inside = None
    for e in run_trigger("dwell", TARGETS, _trace(xs, dts)):
        if e.kind == "enter":
            inside = e.target_id
        elif e.kind == "exit":
            inside = None
        elif e.kind == "select":
            start_inside = TARGETS[e.target_id].contains(xs[0])
            assert inside == e.target_id or (inside is None and start_inside)
            if inside is None:
                inside = e.target_id


@SETTINGS
@given(positions, gaps)
def test_double_crossing_resolves_each_visit_by_edge(xs, dts):
    ev = run_trigger("double_crossing", TARGETS, _trace(xs, dts))
    entry = {}
    for i, e in enumerate(ev):
        if e.kind == "enter":
            entry[e.target_id] = e.edge
        elif e.kind == "exit" and e.target_id in entry:
            # every exit from an entered target is resolved right away
            assert ev[i + 1].kind in ("select", "cancel") and ev[i + 1].target_id == e.target_id
        elif e.kind in ("select", "cancel"):
            prev = ev[i - 1]
            assert prev.kind == "exit" and prev.target_id == e.target_id
            assert (e.kind == "select") == (prev.edge == entry.pop(e.target_id))


@SETTINGS
@given(positions, gaps, st.sampled_from(["double_crossing", "dwell", "pinch"]))
def test_replay_is_deterministic(xs, dts, method):
    cur = _trace(xs, dts)
    det = [c.time + 0.01 for c in cur[1::3]]
    a = run_trigger(method, TARGETS, cur, det, highlighted=0, haptics=True)
    b = run_trigger(method, TARGETS, cur, det, highlighted=0, haptics=True)
    assert a == b


@SETTINGS
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60).filter(lambda v: np.ptp(v) > 1e-3),
       st.floats(0.1, 10.0))
def test_one_euro_stays_in_the_input_hull(xs, speed):
    f = OneEuroState()
    out = []
    for k, x in enumerate(xs):
        _, y = one_euro(f, x, k / 25 * speed)
        out.append(y)
    assert min(xs) - 1e-9 <= min(out) and max(out) <= max(xs) + 1e-9


@SETTINGS
@given(st.lists(st.tuples(st.floats(0.5, 6.0), st.floats(0.05, 5.0)), min_size=3, max_size=20))
def test_fit_residuals_sum_to_zero(pts):
    f = fit_fitts(pts)
    if f is None:
        return
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    assert abs((y - f.predict(x)).sum()) < 1e-9 * max(1.0, float(np.abs(y).sum()))
    assert 0.0 <= f.r2 <= 1.0


@dataclass(frozen=True)
class ShiftedTask(TaskSpec):
    shift: float = 0.0

    @property
    def targets(self):
        return tuple(Target(g.id, g.center + self.shift, g.width) for g in super().targets)


def _records(endpoints, shift):
    recs = []
    for w, eps in endpoints.items():
        base = serial_binary_task(w, 12.0)
        task = ShiftedTask(base.kind, base.W, base.A, base.sequence, shift=shift)
        cs = [g.center for g in task.targets]
        sel = [Selection(k % 2, cs[k % 2] + eps[k], 0.6 * k, 0.6 * k + 0.45 + 0.01 * k, False)
               for k in range(6)]
        recs.append(TrialRecord(task, "dwell", False, sel))
    return recs


@SETTINGS
@given(st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6), st.floats(-8.0, 8.0))
def test_tp_translation_invariance(eps, shift):
    endpoints = {3.0: eps, 6.0: [2 * e for e in eps], 9.0: [3 * e for e in eps]}
    a = summarize(_records(endpoints, 0.0))[0]
    b = summarize(_records(endpoints, shift))[0]
    for x, y in [(a.TP, b.TP), (a.TP_pooled, b.TP_pooled)] + [(c.id_e, d.id_e) for c, d in zip(a.cells, b.cells)]:
        assert (math.isnan(x) and math.isnan(y)) or math.isclose(x, y, rel_tol=1e-9, abs_tol=1e-9)
