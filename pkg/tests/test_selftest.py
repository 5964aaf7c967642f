import os
import subprocess
import sys
from pathlib import Path

import numpy as np

OPEN_LOOP_SELFTEST = """
import numpy as np
from regretobserver import regretobserver_selftest
from regretobserver.tools import ro_sls, ro_synthesis
ro_synthesis.synth_h2 = lambda prob: ro_sls.maps_from_phi_v(np.zeros((prob.ops.ne, prob.ops.nv)), prob.ops)
print(",".join(str(r.passed) for r in regretobserver_selftest.run_selftest()))
"""


def _open_loop_h2(prob):
    from regretobserver.tools import ro_sls
    return ro_sls.maps_from_phi_v(np.zeros((prob.ops.ne, prob.ops.nv)), prob.ops)


def test_selftest_passes():
    from regretobserver import regretobserver_selftest
    results = regretobserver_selftest.run_selftest()
    assert [r.name for r in results] == [name for name, _ in regretobserver_selftest.CHECKS]
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


def test_selftest_reports_broken_h2(monkeypatch):
    from regretobserver import regretobserver_selftest
    from regretobserver.tools import ro_synthesis
    monkeypatch.setattr(ro_synthesis, "synth_h2", _open_loop_h2)
    results = regretobserver_selftest.run_selftest()
    by_name = {r.name: r for r in results}
    assert not by_name["toy scalar H2 observer"].passed
    assert by_name["toy scalar H2 observer"].detail.startswith("CheckFailed")
    assert not by_name["Kalman structure of H2 gains"].passed
    assert by_name["toy scalar clairvoyant observer"].passed


def test_selftest_checks_survive_optimized_mode():
    root = Path(__file__).resolve().parent.parent
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(p for p in (str(root), env.get("PYTHONPATH", "")) if p)
    out = subprocess.run([sys.executable, "-O", "-c", OPEN_LOOP_SELFTEST], env=env, cwd=str(root),
                         capture_output=True, text=True, check=True)
    passed = out.stdout.strip().splitlines()[-1].split(",")
    assert passed[0] == "False"
    assert passed[-1] == "False"
