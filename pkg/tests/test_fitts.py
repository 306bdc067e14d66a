import itertools
import math

import numpy as np
import pytest

from sonarpoint.errors import ConfigurationError, ContractViolation
from sonarpoint.fitts import (
    PUBLISHED_MODELS, STUDY2_BLOCKS, STUDY2_SELECTIONS, STUDY2_TRIALS_PER_BLOCK, Selection, TaskSpec, TrialRecord,
    effective_id, fit_fitts, make_study1_block, make_study1_session, make_study2_session, make_study2_trial,
    move_kind, movements, serial_binary_task, summarize, valid_study2_sequences,
)


class TestEffectiveId:
    def test_log2_three(self):
        # W_e = 6 needs SD = 6 / 4.133
        sd = 6 / 4.133
        eid = effective_id([12.0, 12.0], [-sd / math.sqrt(2), sd / math.sqrt(2)])
        assert eid.w_e == pytest.approx(6.0, abs=1e-9)
        assert eid.id_e == pytest.approx(1.584962500721156, abs=1e-9)

    def test_two_point_fixture(self):
        eid = effective_id([11.0, 13.0], [-1.0, 1.0])
        assert eid.w_e == pytest.approx(5.844944653288002, abs=1e-9)
        assert eid.id_e == pytest.approx(1.6102541580003007, abs=1e-9)

    def test_five_point_fixture(self):
        eid = effective_id([11.5, 12.25, 13.0, 12.0, 11.75], [0.5, -1.25, 2.0, 0.0, -0.75])
        assert eid.a_e == pytest.approx(12.1, abs=1e-9)
        assert eid.w_e == pytest.approx(5.197155061305176, abs=1e-9)
        assert eid.id_e == pytest.approx(1.7347407622859943, abs=1e-9)
        assert not eid.degenerate

    def test_zero_spread_is_floored_and_flagged(self):
        eid = effective_id([12.0, 12.0, 12.0], [0.0, 0.0, 0.0])
        assert eid.degenerate and eid.w_e == 0.1
        assert eid.id_e == pytest.approx(math.log2(121.0))

    def test_needs_two(self):
        with pytest.raises(ContractViolation):
            effective_id([12.0], [0.0])


class TestFit:
    def test_exact_line(self):
        pts = [(x, 0.1 + 0.5 * x) for x in (1.0, 1.7, 2.2, 3.0)]
        f = fit_fitts(pts)
        assert f.a == pytest.approx(0.1, abs=1e-9)
        assert f.b == pytest.approx(0.5, abs=1e-9)
        assert f.r2 == pytest.approx(1.0, abs=1e-9)

    def test_noisy_line_monte_carlo(self):
        rng = np.random.default_rng(11)
        x = np.linspace(1.0, 3.5, 12)
        sigma = 0.05
        # standard errors of OLS intercept and slope for this design
        sxx = ((x - x.mean()) ** 2).sum()
        se_b = sigma / math.sqrt(sxx)
        se_a = sigma * math.sqrt(1 / len(x) + x.mean() ** 2 / sxx)
        for _ in range(50):
            y = 0.1 + 0.5 * x + rng.normal(0, sigma, len(x))
            f = fit_fitts(list(zip(x, y)))
            assert abs(f.a - 0.1) < 3 * se_a + 1e-12 or abs(f.b - 0.5) < 3 * se_b
            assert abs(f.b - 0.5) < 4 * se_b
            assert f.r2 > 0.9

    def test_residuals_sum_to_zero(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(1, 4, 9)
        y = 0.3 + 0.4 * x + rng.normal(0, 0.1, 9)
        f = fit_fitts(list(zip(x, y)))
        assert abs((y - f.predict(x)).sum()) < 1e-9

    def test_unavailable(self):
        assert fit_fitts([(1, 1), (2, 2)]) is None
        assert fit_fitts([(2, 1), (2, 2), (2, 3)]) is None

    @pytest.mark.parametrize("method,id_e,mt", [
        ("double_crossing", 2.0, 1.015),
        ("double_crossing", 1.0, 0.540),
        ("dwell", 2.0, 1.392),
        ("dwell", 3.0, 1.853),
        ("pinch", 2.0, 2.489),
        ("pinch", 1.5, 1.872),
    ])
    def test_printed_models(self, method, id_e, mt):
        assert float(PUBLISHED_MODELS[method].predict(id_e)) == pytest.approx(mt, abs=1e-12)


class TestStudy1Protocol:
    def test_block_has_every_combo_twice(self):
        block = make_study1_block(np.random.default_rng(0))
        assert len(block) == 12
        combos = [(t.W, t.A) for t in block]
        for w, a in itertools.product((3.0, 6.0, 9.0), (12.0, 15.0)):
            assert combos.count((w, a)) == 2

    def test_288_selections_per_method(self):
        session = make_study1_session(5)
        assert sum(t.selections_per_trial for _, _, t in session) == 6 * 3 * 2 * 2 * 4 == 288
        assert [p for b, p, _ in session] == [b == 0 for b, _, _ in session]

    def test_same_seed_same_order(self):
        a = [(t.W, t.A) for _, _, t in make_study1_session(5)]
        b = [(t.W, t.A) for _, _, t in make_study1_session(5)]
        c = [(t.W, t.A) for _, _, t in make_study1_session(6)]
        assert a == b and a != c

    def test_alternating_targets(self):
        t = serial_binary_task(6, 12)
        assert t.sequence == (0, 1, 0, 1, 0, 1)
        g0, g1 = t.targets
        assert g1.center - g0.center == 12.0
        assert g0.left >= 0 and g1.right <= 37.3

    def test_must_fit_display(self):
        with pytest.raises(ConfigurationError):
            TaskSpec("serial_binary", 9.0, 35.0, (0, 1))
        with pytest.raises(ConfigurationError):
            TaskSpec("serial_binary", 6.0, 12.0, (0, 2))
        with pytest.raises(ConfigurationError):
            TaskSpec("zigzag", 6.0, 12.0, (0, 1))


def _reference_sequences(start):
    # independent enumeration: move sizes over the three steps must be {0, 1, 2}
    out = set()
    for rest in itertools.product(range(3), repeat=3):
        seq = (start,) + rest
        if sorted(abs(a - b) for a, b in zip(seq, seq[1:])) == [0, 1, 2]:
            out.add(seq)
    return out


class TestStudy2Protocol:
    def test_enumeration_matches_reference(self):
        for start in range(3):
            assert set(valid_study2_sequences(start)) == _reference_sequences(start)

    def test_generated_sequences_are_valid(self):
        rng = np.random.default_rng(0)
        valid = set().union(*(_reference_sequences(s) for s in range(3)))
        seen = set()
        for _ in range(500):
            t = make_study2_trial(rng)
            assert t.sequence in valid
            assert t.W == 6.0 and t.A == 12.0 and t.selections_per_trial == 4
            seen.add(t.sequence)
        assert seen == valid

    def test_adjacency(self):
        assert move_kind(0, 1) == move_kind(1, 2) == "adjacent"
        assert move_kind(0, 2) == "non_adjacent"
        assert move_kind(1, 1) == "repeat"

    def test_480_selections(self):
        session = make_study2_session(1)
        per_condition = sum(t.selections_per_trial for _, _, t in session)
        assert per_condition == STUDY2_SELECTIONS * STUDY2_TRIALS_PER_BLOCK * STUDY2_BLOCKS == 120
        assert per_condition * 2 * 2 == 480  # two methods, haptics off and on

    def test_three_centred_targets(self):
        t = make_study2_trial(0)
        cs = [g.center for g in t.targets]
        assert cs[1] == pytest.approx(37.3 / 2) and np.allclose(np.diff(cs), 12.0)


def _record(endpoints, errors=None, W=6.0, A=12.0, method="pinch", re=None, practice=False, shift=0.0):
    task = serial_binary_task(W, A, len(endpoints))
    errors = errors or [False] * len(endpoints)
    re = re or [0] * len(endpoints)
    sel = [Selection(task.sequence[k], e + shift, 0.5 * k, 0.5 * k + 0.4, errors[k], re[k])
           for k, e in enumerate(endpoints)]
    return TrialRecord(task, method, False, sel, practice=practice)


class TestSummaries:
    def test_first_selection_is_excluded(self):
        r = _record([0.0, 25.0, 12.7, 24.2, 13.4, 25.5])
        ms = movements(r)
        assert len(ms) == 5
        assert ms[0].amplitude == 25.0 and ms[0].mt == pytest.approx(0.5)
        # target 1 centre is 24.65; deviation signed along the move
        assert ms[0].deviation == pytest.approx(25.0 - 24.65)
        assert ms[1].deviation == pytest.approx(-(12.7 - 12.65))

    def test_er_and_success_add_to_one(self):
        recs = [_record([0, 25, 12, 24, 13, 25], errors=[False, True, False, False, True, False])]
        s = summarize(recs)[0]
        assert s.ER == pytest.approx(40.0)
        assert s.cells[0].er == pytest.approx(40.0)

    def test_tre_per_trial(self):
        recs = [_record([0, 25, 12, 24, 13, 25], re=[3, 1, 0, 2, 0, 0]), _record([0, 25, 12, 24, 13, 25])]
        assert summarize(recs)[0].TRE == pytest.approx(1.5)  # first selection's re-entries excluded

    def test_practice_dropped(self):
        recs = [_record([0, 25, 12, 24, 13, 25]), _record([0, 20, 10, 20, 10, 20], practice=True)]
        assert summarize(recs)[0].n == 5
        assert summarize(recs, include_practice=True)[0].n == 10

    def test_empty_cells_omitted(self):
        recs = [_record([0, 25, 12, 24, 13, 25], W=6.0), _record([0, 25, 12, 24, 13, 25], W=9.0, method="dwell")]
        out = summarize(recs)
        assert [s.method for s in out] == ["dwell", "pinch"]
        assert [(c.W, c.A) for c in out[0].cells] == [(9.0, 12.0)]

    def test_tp_is_mean_of_cell_throughputs(self):
        dev = np.array([0.0, 0.35, -0.35, 0.25, -0.45, -0.25])
        recs = [_record(list(np.array([0, 24.65, 12.65, 24.65, 12.65, 24.65]) + dev * w / 3), W=w, A=12.0)
                for w in (3.0, 6.0, 9.0)]
        s = summarize(recs)[0]
        assert len(s.cells) == 3
        assert s.TP == pytest.approx(np.mean([c.tp for c in s.cells]))
        assert s.model is not None and 0.0 <= s.model.r2 <= 1.0
        # wider scatter means a lower effective ID at equal movement time
        ids = [c.id_e for c in s.cells]
        assert ids[0] > ids[1] > ids[2]

    def test_needs_records(self):
        with pytest.raises(ContractViolation):
            summarize([])

    def test_missing_trials_counted(self):
        r = _record([0, 25, 12, 24, 13, 25])
        gone = _record([0, 25, 12, 24, 13, 25])
        gone.missing = True
        s = summarize([r, gone])[0]
        assert s.missing == 1 and s.n == 5

    def test_selection_contract(self):
        with pytest.raises(ContractViolation):
            Selection(0, math.inf, 0.0, 1.0, False)
        with pytest.raises(ContractViolation):
            Selection(0, 1.0, 1.0, 1.0, False)
        with pytest.raises(ConfigurationError):
            TrialRecord(serial_binary_task(6, 12), "wink")
