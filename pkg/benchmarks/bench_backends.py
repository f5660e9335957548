"""Compare the numba and pure-numpy kernel backends on the filter pipeline.

Runs the same simulate-and-filter workload in subprocesses with
FOOTNAV_BACKEND set to each backend and reports wall times. The first numba
run includes JIT compilation unless the on-disk cache is warm.

    python benchmarks/bench_backends.py [--laps 2] [--repeat 3]
"""

import argparse
import os
import subprocess
import sys

WORKLOAD = r"""
import time
import numpy as np
from footnav import gaitsim, pipeline
from footnav.logio import TruthTable
from footnav.strapdown import LEFT, RIGHT

d2r = np.pi / 180.0
p = gaitsim.GaitParams(
    side_strides=25, laps={laps},
    sigma_g=1.4544e-4, sigma_a=1e-3, range_noise=0.02,
    gyro_bias_left=(2*d2r, 2.3*d2r, 1.7*d2r), gyro_bias_right=(2*d2r, 2.3*d2r, 1.7*d2r),
    accel_bias_left=(0.1, 0.2, -0.2), accel_bias_right=(0.1, 0.2, -0.2))

t0 = time.perf_counter()
sim = gaitsim.build_square_walk(p, seed=1)
t_gen = time.perf_counter() - t0

truth = {{LEFT: TruthTable.from_stream(sim.truth_left),
          RIGHT: TruthTable.from_stream(sim.truth_right)}}
init = pipeline.InitSpec(
    att_err_left=(2*d2r, 5*d2r, 2*d2r), att_err_right=(-2*d2r, -3*d2r, -4*d2r),
    gyro_bias_left=(1.7*d2r, 1.6*d2r, 1.3*d2r), gyro_bias_right=(2.5*d2r, 2.8*d2r, 1.0*d2r))
il, ir = pipeline.init_states_truth_offset(truth[LEFT], truth[RIGHT], init)
ranges = sim.ranges.samples(p.lever_left, p.lever_right)
fcfg = pipeline.FilterConfig()

best = []
for _ in range({repeat}):
    t0 = time.perf_counter()
    pipeline.run_filter(sim.imu_left, sim.imu_right, ranges, il, ir, fcfg,
                        pipeline.VARIANTS["zupt-rng"])
    best.append(time.perf_counter() - t0)
print("GEN %.3f FILTER %.3f" % (t_gen, min(best)))
"""


def run(backend, laps, repeat):
    env = dict(os.environ, FOOTNAV_BACKEND=backend)
    res = subprocess.run(
        [sys.executable, "-c", WORKLOAD.format(laps=laps, repeat=repeat)],
        env=env, capture_output=True, text=True,
    )
    if res.returncode != 0:
        raise RuntimeError(f"{backend} run failed:\n{res.stderr}")
    line = [l for l in res.stdout.splitlines() if l.startswith("GEN")][-1]
    _, gen, _, filt = line.split()
    return float(gen), float(filt)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--laps", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rows = []
    for backend in ("numpy", "numba"):
        try:
            gen, filt = run(backend, args.laps, args.repeat)
            rows.append((backend, gen, filt))
        except RuntimeError as exc:
            print(f"{backend}: failed ({exc})")

    print(f"\nworkload: {args.laps} laps, best of {args.repeat} filter runs")
    print(f"{'backend':<8} {'generate [s]':>13} {'filter [s]':>11}")
    for backend, gen, filt in rows:
        print(f"{backend:<8} {gen:>13.3f} {filt:>11.3f}")
    if len(rows) == 2:
        print(f"\nfilter speedup numba vs numpy: {rows[0][2] / rows[1][2]:.2f}x")


if __name__ == "__main__":
    main()
