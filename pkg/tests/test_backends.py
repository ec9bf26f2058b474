"""The numba kernels and the plain-Python fallback must compute the same numbers.

The backend is fixed at import time, so each one runs in a fresh interpreter.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

WORKER = r"""
import json
import numpy as np
from paramskill import backend_name
from paramskill.armsim import ArmState, Task, simulate_throw, step, ArmConfig
from paramskill.dmp import DmpConstants, default_theta, integrate_dmp
from paramskill.power import ExplorationConfig, learn_policy

theta = default_theta(6.0, 0.55)
theta[2:] = np.linspace(-2, 2, 35)
out = {"backend": backend_name()}
out["dmp"] = integrate_dmp(theta, 0.1, 2.0, DmpConstants(), 1e-3).angle[::50].tolist()
out["throws"] = [simulate_throw(theta, Task.from_angle(a)).distance_to_target
                 for a in (0.4, 1.2, 2.0, 2.8)]
s = ArmState(np.array([0.3, 2.0, -0.4]), np.array([0.0, 5.0, 1.0]))
for _ in range(500):
    s = step(s, 3.0, ArmConfig())
out["state"] = s.joint_angles.tolist() + s.joint_velocities.tolist()
res = learn_policy(Task.from_angle(1.0), default_theta(), ExplorationConfig(max_updates=3), seed=2)
out["learn"] = res.final_theta.tolist()
print(json.dumps(out))
"""


def run_backend(disable: bool) -> dict:
    env = dict(os.environ, PARAMSKILL_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def both():
    return run_backend(False), run_backend(True)


def test_backends_selected_by_flag(both):
    fast, slow = both
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"


@pytest.mark.parametrize("key", ["dmp", "throws", "state", "learn"])
def test_backends_agree(both, key):
    fast, slow = both
    a, b = np.array(fast[key]), np.array(slow[key])
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
