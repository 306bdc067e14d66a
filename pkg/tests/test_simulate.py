import math

import numpy as np
import pytest

from sonarpoint.errors import ConfigurationError
from sonarpoint.signals import demodulate_stream
from sonarpoint.simulate import (
    BurstShape, Finger, SceneConfig, Segment, Trajectory, Walker, echo_gain, evaluate_stage_trial,
    linear_stage_protocol, noise_sigma, pinch_burst, pinch_corpus, quiet_imu, scene_from_dict, scene_to_dict,
    synthesize_echo, synthesize_imu,
)
from sonarpoint.triggers import detect_pinches, score_detections


def hold_scene(r, gain=0.25, statics=(), snr=None, seconds=1.0):
    return SceneConfig(statics, Finger(r, gain, Trajectory((Segment("hold", seconds),))), snr, None, 0)


class TestTrajectory:
    def test_offset_pieces(self):
        traj = Trajectory((Segment("hold", 1.0), Segment("constant_velocity", 2.0, 10.0),
                           Segment("min_jerk", 1.0, -4.0)))
        t = np.array([0.0, 0.5, 1.0, 2.0, 3.0, 3.5, 4.0, 9.0])
        want = [0.0, 0.0, 0.0, 5.0, 10.0, 8.0, 6.0, 6.0]
        assert np.allclose(traj.offset(t), want)
        assert traj.duration == 4.0 and traj.net_displacement == 6.0

    def test_min_jerk_is_smooth_at_ends(self):
        seg = Segment("min_jerk", 1.0, 1.0)
        s = np.array([0.0, 1e-4, 1 - 1e-4, 1.0])
        x = seg.shape(s)
        assert x[0] == 0.0 and x[-1] == 1.0
        assert x[1] < 1e-10 and 1 - x[2] < 1e-10

    @pytest.mark.parametrize("kw", [
        {"kind": "teleport", "duration": 1.0},
        {"kind": "hold", "duration": 0.0},
        {"kind": "hold", "duration": 1.0, "delta": 3.0},  # would be a discontinuity
    ])
    def test_bad_segments(self, kw):
        with pytest.raises(ConfigurationError):
            Segment(**kw)

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            Trajectory(())


class TestEcho:
    def test_gain_law(self):
        assert echo_gain(0.25, 10.0) == pytest.approx(0.25)  # below the floor
        assert echo_gain(0.25, 30.0) == pytest.approx(0.25)
        assert echo_gain(0.25, 60.0) == pytest.approx(0.0625)
        assert echo_gain(0.25, 150.0) == pytest.approx(0.01)

    def test_static_scene_gives_constant_baseband(self, config):
        rec = synthesize_echo(SceneConfig(noise_snr_db=None), config, duration=1.0)
        z = demodulate_stream(rec.audio, config).samples[5:]
        assert np.max(np.abs(z - z.mean())) < 1e-5 * abs(z.mean())

    @pytest.mark.parametrize("r", [10.0, 42.0, 77.7, 160.0])
    def test_finger_phasor(self, config, r):
        # round trip: phase -4*pi*r/lambda, amplitude from the gain law
        rec = synthesize_echo(hold_scene(r), config)
        z = demodulate_stream(rec.audio, config).samples[5:]
        want = 0.9 * echo_gain(0.25, r) * np.exp(-4j * np.pi * r / config.wavelength)
        assert np.max(np.abs(z - want)) < 1e-5 * abs(want)

    def test_snr_calibration(self, config):
        scene = hold_scene(40.0, snr=20.0, seconds=2.0)
        sigma = noise_sigma(scene)
        assert sigma == pytest.approx(0.9 * 0.25 / math.sqrt(2) / 10)
        clean = synthesize_echo(hold_scene(40.0, seconds=2.0), config).audio
        noisy = synthesize_echo(scene, config).audio
        assert np.std(noisy - clean) == pytest.approx(sigma, rel=0.02)

    def test_walker_moves_the_baseband(self, config):
        scene = SceneConfig((), None, None, Walker(), 0)
        z = demodulate_stream(synthesize_echo(scene, config, duration=2.0).audio, config).samples[5:]
        amp = 0.9 * Walker().gain
        assert np.abs(z).max() == pytest.approx(1.5 * amp, rel=0.02)
        assert np.abs(z).min() == pytest.approx(0.5 * amp, rel=0.02)

    def test_deterministic(self, config):
        scene = SceneConfig(walker=Walker(), seed=9, finger=hold_scene(30.0).finger)
        a = synthesize_echo(scene, config)
        b = synthesize_echo(scene, config)
        assert a.audio.tobytes() == b.audio.tobytes()
        assert a.truth_range.tobytes() == b.truth_range.tobytes()

    def test_seed_changes_noise(self, config):
        a = synthesize_echo(SceneConfig(seed=1), config, duration=0.1).audio
        b = synthesize_echo(SceneConfig(seed=2), config, duration=0.1).audio
        assert not np.array_equal(a, b)

    def test_truth_grid(self, config):
        rec = synthesize_echo(hold_scene(30.0), config)
        assert np.allclose(np.diff(rec.truth_time), 1 / config.baseband_rate)
        assert np.all(rec.truth_displacement == 0.0)

    def test_needs_duration_without_finger(self, config):
        with pytest.raises(ConfigurationError):
            synthesize_echo(SceneConfig(), config)

    @pytest.mark.parametrize("kw", [{"static_reflectors": ((-1.0, 0.1),)}, {"static_reflectors": ((1.0, -0.1),)}])
    def test_negative_scene_values(self, kw):
        with pytest.raises(ConfigurationError):
            SceneConfig(**kw)


class TestStageProtocol:
    def test_default_count(self):
        trials = linear_stage_protocol()
        assert len(trials) == 240
        cells = {(t.range_band, t.speed, t.noise) for t in trials}
        assert len(cells) == 24

    def test_single_cell(self):
        assert len(linear_stage_protocol(ranges=[(0, 50)], speeds=[80], noise=["none"], reps=10)) == 10

    def test_trials_are_5cm_moves(self):
        for t in linear_stage_protocol(reps=1):
            assert t.movement == 50.0
            assert t.scene.finger.start_range == t.range_band[0]

    def test_seeds_are_distinct(self):
        seeds = [t.scene.seed for t in linear_stage_protocol()]
        assert len(set(seeds)) == len(seeds)

    def test_rejects_unknown_noise(self):
        with pytest.raises(ConfigurationError):
            linear_stage_protocol(noise=["rain"])

    def test_speed_has_no_systematic_effect(self, config):
        trials = linear_stage_protocol(ranges=[(0, 50), (50, 100)], noise=["none"], reps=2)
        err = {}
        for t in trials:
            err.setdefault(t.speed, []).append(evaluate_stage_trial(t, config).error)
        means = [np.mean(v) for v in err.values()]
        assert max(means) < 1.0
        assert max(means) - min(means) < 0.5

    def test_walker_inflation_is_small_near_the_device(self, config):
        trials = linear_stage_protocol(ranges=[(0, 50), (50, 100)], speeds=[80], reps=3)
        err = {"none": [], "walker": []}
        for t in trials:
            err[t.noise].append(evaluate_stage_trial(t, config).error)
        assert np.mean(err["walker"]) - np.mean(err["none"]) < 1.0


class TestImu:
    def test_zero_stream(self):
        imu = synthesize_imu([], 0.0, 5.0)
        assert imu.samples.shape == (500, 3)
        assert not imu.samples.any()

    def test_overlapping_bursts(self):
        with pytest.raises(ConfigurationError):
            synthesize_imu([1.0, 1.1], 0.1, 5.0)

    def test_burst_outside_stream(self):
        with pytest.raises(ConfigurationError):
            synthesize_imu([6.0], 0.1, 5.0)

    def test_burst_peak_is_calibrated(self):
        t = np.arange(0, 1, 1e-5)
        assert np.abs(pinch_burst(t, 0.2, 37.0, 8.0, 0.05)).max() == pytest.approx(8.0, rel=1e-6)
        assert not pinch_burst(t[t < 0.2], 0.2, 37.0, 8.0, 0.05).any()

    def test_burst_power_sits_above_the_highpass(self):
        t = np.arange(0, 2.56, 0.01)
        for f in (30.0, 37.5, 45.0):
            x = pinch_burst(t, 0.5, f, 8.0, 0.05)
            p = np.abs(np.fft.rfft(x)) ** 2
            freqs = np.fft.rfftfreq(len(x), 0.01)
            assert p[freqs > 15].sum() / p.sum() >= 0.9

    def test_times_and_determinism(self):
        a = synthesize_imu([1.0, 2.0], 0.3, 3.0, seed=5, gravity=9.81, drift_rms=1.0)
        b = synthesize_imu([1.0, 2.0], 0.3, 3.0, seed=5, gravity=9.81, drift_rms=1.0)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert np.allclose(np.diff(a.times), 0.01)
        assert a.samples[:, 2].mean() == pytest.approx(9.81, abs=0.5)

    def test_twenty_bursts_recovered(self):
        onsets = 1.0 + 0.8 * np.arange(20)
        imu = synthesize_imu(onsets, 0.1, 18.0, seed=3, shape=BurstShape())
        hits, misses, fps = score_detections(detect_pinches(imu), onsets)
        assert hits >= 19 and fps == 0

    def test_corpus_shape(self):
        imu, onsets = pinch_corpus(50, seed=2)
        assert len(onsets) == 50
        assert np.all(np.diff(onsets) >= 0.6 - 1e-12)
        assert imu.times[-1] > onsets[-1]

    def test_quiet_stream_has_no_bursts(self):
        imu = quiet_imu(30.0, seed=1)
        assert len(imu) == 3000


class TestSceneFile:
    def scene(self):
        traj = Trajectory((Segment("hold", 0.5), Segment("min_jerk", 0.4, 12.0)))
        return SceneConfig(finger=Finger(35.0, 0.2, traj), walker=Walker(period_s=3.0), seed=4)

    def test_round_trip(self):
        d = scene_to_dict(self.scene(), 2.5)
        back, dur = scene_from_dict(d)
        assert back == self.scene() and dur == 2.5
        assert scene_to_dict(back, dur) == d

    def test_defaults(self):
        scene, dur = scene_from_dict({"schema_version": 1})
        assert scene == SceneConfig() and dur is None

    @pytest.mark.parametrize("patch", [
        {"schema_version": 2},
        {"colour": "red"},
        {"seed": -1},
        {"seed": True},
        {"seed": 1.5},
        {"noise_snr_db": "loud"},
        {"duration_s": float("nan")},
        {"walker": {"hat": 1.0}},
        {"finger": {"start_range_mm": 10.0}},
        {"finger": {"start_range_mm": 10.0, "trajectory": [{"kind": "hold", "duration_s": 1.0, "delta_mm": 2.0}]}},
        {"static_reflectors": [{"range_mm": -1.0, "gain": 0.1}]},
    ])
    def test_rejects(self, patch):
        d = {"schema_version": 1, **patch}
        with pytest.raises(ConfigurationError):
            scene_from_dict(d)

    def test_not_an_object(self):
        with pytest.raises(ConfigurationError):
            scene_from_dict([1, 2])

    def test_null_snr_means_noiseless(self):
        scene, _ = scene_from_dict({"schema_version": 1, "noise_snr_db": None})
        assert scene.noise_snr_db is None
