"""Time the numba kernels against the plain-Python fallback.

Each backend runs in its own interpreter because the backend is chosen at
import time from ``PARAMSKILL_DISABLE_NUMBA``.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from paramskill import backend_name, default_theta, Task, simulate_throw
from paramskill.dmp import DmpConstants, integrate_dmp
from paramskill.power import ExplorationConfig, learn_policy

repeats = int(sys.argv[1])
theta = default_theta(8.0, 0.6)
theta[2:] = np.linspace(-1, 1, 35)
task = Task.from_angle(0.8)
consts = DmpConstants()
simulate_throw(theta, task)          # compile / warm caches
integrate_dmp(theta, 0.0, 2.0, consts, 1e-3)

def best_of(fn, n):
    times = []
    for _ in range(n):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out

t_throw, outcome = best_of(lambda: simulate_throw(theta, task), repeats)
t_dmp, _ = best_of(lambda: integrate_dmp(theta, 0.0, 2.0, consts, 1e-3), repeats)
cfg = ExplorationConfig(max_updates=3)
t_learn, res = best_of(lambda: learn_policy(task, default_theta(), cfg, seed=0), 1)
print(json.dumps({"backend": backend_name(), "throw_s": t_throw, "dmp_s": t_dmp,
                  "learn3_s": t_learn, "distance": outcome.distance_to_target,
                  "learn_best": res.best_distance}))
"""


def run(disable: bool, repeats: int) -> dict:
    env = dict(os.environ, PARAMSKILL_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    fast = run(False, args.repeats)
    slow = run(True, max(2, args.repeats // 10))
    print(f"{'kernel':<28}{'numba':>12}{'fallback':>12}{'speedup':>10}")
    for key, label in [("throw_s", "simulate_throw"), ("dmp_s", "integrate_dmp (2 s)"),
                       ("learn3_s", "learn_policy (3 updates)")]:
        print(f"{label:<28}{fast[key] * 1e3:>10.2f}ms{slow[key] * 1e3:>10.2f}ms"
              f"{slow[key] / fast[key]:>9.1f}x")
    agree = abs(fast["distance"] - slow["distance"]) <= 1e-9 * max(1.0, abs(fast["distance"]))
    print(f"throw distance agrees across backends: {agree} "
          f"({fast['distance']!r} vs {slow['distance']!r})")


if __name__ == "__main__":
    main()
