"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the two hot kernels on realistic inputs and the full per-frame
``Tracker.track_frame`` path (demodulation included) with each backend, and
checks that both backends produce the same numbers.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sonarpoint import kernels
from sonarpoint.signals import AudioFrame, SonarConfig, demodulate_stream
from sonarpoint.simulate import pinch_corpus, synthesize_echo, linear_stage_protocol
from sonarpoint.tracking import LevdState, Tracker
from sonarpoint.triggers import PinchDetectorState, pinch_detect_block


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_levd(audio, config, repeat):
    bb = demodulate_stream(audio, config)
    re = np.ascontiguousarray(bb.samples.real)
    im = np.ascontiguousarray(bb.samples.imag)
    t = np.ascontiguousarray(bb.times)
    n = len(re)
    lv = LevdState()

    def run():
        st = kernels.new_levd_state()
        dyn_re, dyn_im, phase, ext = np.empty(n), np.empty(n), np.empty(n), np.empty((2 * n, 4))
        kernels.levd_unwrap(re, im, t, st, lv.pp_threshold, lv.hysteresis_fraction * lv.pp_threshold,
                            lv.consistency_fraction, lv.gate, dyn_re, dyn_im, phase, ext)
        return phase

    sec, phase = _best(run, repeat)
    return sec / n * 1e6, phase  # us per baseband sample


def bench_pinch(imu, repeat):
    def run():
        st = PinchDetectorState()
        det, _ = pinch_detect_block(st, imu.samples, imu.times)
        return det

    sec, det = _best(run, repeat)
    return sec / len(imu) * 1e6, det  # us per IMU sample


def bench_frames(audio, config):
    tracker = Tracker(config)
    n = config.frame_len
    times, pos = [], []
    for k in range(len(audio) // n):
        t0 = time.perf_counter()
        c = tracker.track_frame(AudioFrame(audio[k * n:(k + 1) * n], k * config.frame_duration))
        times.append(time.perf_counter() - t0)
        pos.append(c.position)
    ms = np.array(times[1:]) * 1000  # first frame pays for the filter design
    return float(np.median(ms)), float(np.percentile(ms, 99)), float(ms.max()), np.array(pos)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    config = SonarConfig()
    trial = linear_stage_protocol(speeds=(80.0,), noise=("walker",), reps=1)[0]
    audio = synthesize_echo(trial.scene, config).audio
    imu, _ = pinch_corpus(200, seed=0)

    results = {}
    for name in sorted(kernels.backends()):
        kernels.use_backend(name)
        levd_us, phase = bench_levd(audio, config, args.repeat)
        pinch_us, det = bench_pinch(imu, args.repeat)
        med, p99, worst, pos = bench_frames(audio, config)
        results[name] = (levd_us, pinch_us, med, p99, worst, phase, det, pos)

    print(f"{'backend':8s} {'levd us/sample':>15s} {'pinch us/sample':>16s} "
          f"{'frame median ms':>16s} {'frame p99 ms':>13s} {'frame max ms':>13s}")
    for name, (levd_us, pinch_us, med, p99, worst, *_) in results.items():
        print(f"{name:8s} {levd_us:15.3f} {pinch_us:16.3f} {med:16.3f} {p99:13.3f} {worst:13.3f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speed-up: levd x{py[0] / cy[0]:.1f}, pinch x{py[1] / cy[1]:.1f}, frame x{py[2] / cy[2]:.1f}")
        same = (np.allclose(py[5], cy[5], atol=1e-9) and np.array_equal(py[6], cy[6])
                and np.allclose(py[7], cy[7], atol=1e-9))
        print("outputs agree:", same)
    budget = max(r[4] for r in results.values())
    print(f"worst frame {budget:.2f} ms against a 15 ms budget: {'ok' if budget < 15 else 'OVER'}")
    kernels.use_backend("cython" if "cython" in results else "python")
    return 0


if __name__ == "__main__":
    main()
