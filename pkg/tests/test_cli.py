import json
import subprocess
import sys

import numpy as np
import pytest

from paramskill.cli import main
from paramskill.pipeline import ExperimentConfig, load_policies, save_config, save_policies


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def policy_table(tmp_path_factory):
    """Policies on both sides of the room from two well-separated smooth families."""
    tmp = tmp_path_factory.mktemp("cli")
    angles = np.linspace(0.3, 2.8, 16)
    left = angles > 1.57
    th = np.zeros((16, 37))
    th[:, 0] = 0.4
    th[:, 1] = np.where(left, 3.0 + angles, -3.0 + angles)
    th[:, 2:] = np.where(left, 20.0, -20.0)[:, None] + np.sin(angles)[:, None]
    path = tmp / "policies.csv"
    save_policies(path, angles, th)
    return path


def test_sample_tasks(tmp_path, capsys):
    out = tmp_path / "tasks.csv"
    code, _, _ = run(["sample-tasks", "--n", "5", "--seed", "3", "--out", str(out)], capsys)
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "index,angle,x,y" and len(lines) == 6


def test_sample_tasks_to_stdout(capsys):
    code, out, _ = run(["sample-tasks", "--n", "2", "--lo", "1.0", "--hi", "1.0"], capsys)
    assert code == 0 and out.splitlines()[1].split(",")[1] == "1.0"


def test_learn_policy(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = run(["learn-policy", "--angle", "2.5", "--out", str(out)], capsys)
    info = json.loads(stdout)
    assert code == 0 and info["converged"] and info["best_distance"] <= 0.05
    angles, thetas = load_policies(out)
    assert angles[0] == 2.5 and thetas.shape == (1, 37)


def test_learn_policy_failure_exit_code(capsys):
    code, _, err = run(["learn-policy", "--angle", "1.0", "--max-updates", "0"], capsys)
    assert code == 1 and err.startswith("paramskill learn_policy:")


def test_analyze_train_predict_evaluate(policy_table, tmp_path, capsys):
    mdir = tmp_path / "manifold"
    code, stdout, _ = run(["analyze-manifold", "--policies", str(policy_table), "--k", "3",
                           "--out-dir", str(mdir)], capsys)
    assert code == 0 and json.loads(stdout)["num_charts"] == 2
    assert (mdir / "charts.csv").exists() and (mdir / "manifold.json").exists()

    skill = tmp_path / "skill.jsonl"
    code, stdout, _ = run(["train-skill", "--policies", str(policy_table),
                           "--charts", str(mdir / "charts.csv"), "--out", str(skill)], capsys)
    info = json.loads(stdout)
    assert code == 0 and info["num_charts"] == 2 and abs(info["boundaries"][0] - 1.57) < 0.2

    pred = tmp_path / "pred.csv"
    code, _, _ = run(["predict", "--skill", str(skill), "--angle", "0.5", "2.5",
                      "--out", str(pred)], capsys)
    angles, thetas = load_policies(pred)
    assert code == 0 and list(angles) == [0.5, 2.5]
    assert thetas[0, 2] < 0 < thetas[1, 2]

    ev = tmp_path / "eval.csv"
    code, _, _ = run(["evaluate", "--skill", str(skill), "--angle", "1.0", "--out", str(ev)],
                     capsys)
    lines = ev.read_text().splitlines()
    assert code == 0 and lines[0] == "angle,chart,zero_shot_distance" and len(lines) == 2


def test_train_skill_detects_charts(policy_table, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    save_config(ExperimentConfig(manifold_k=3), cfg)
    code, stdout, _ = run(["train-skill", "--config", str(cfg), "--policies", str(policy_table),
                           "--out", str(tmp_path / "s.jsonl")], capsys)
    assert code == 0 and json.loads(stdout)["num_charts"] == 2


def test_predict_missing_skill(tmp_path, capsys):
    code, _, err = run(["predict", "--skill", str(tmp_path / "none.jsonl"), "--angle", "1.0"],
                       capsys)
    assert code == 1 and err.startswith("paramskill predict:")


def test_corrupt_skill_names_stage(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"section": "header"}\n')
    code, _, err = run(["predict", "--skill", str(bad), "--angle", "1.0"], capsys)
    assert code == 1 and "predict" in err and "missing" in err


def test_run_experiment_and_emit_figures(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "run"
    save_config(ExperimentConfig(num_training_tasks=6, sweep_sizes=(3, 6), num_eval_tasks=2,
                                 master_seed=4), cfg)
    code, stdout, _ = run(["run-experiment", "--config", str(cfg), "--output-dir", str(out)], capsys)
    info = json.loads(stdout)
    assert code == 0 and [s["size"] for s in info["sweep"]] == [3, 6]
    figs = tmp_path / "figs"
    code, stdout, _ = run(["emit-figures", "--report", str(out / "report.json"),
                           "--out-dir", str(figs), "--no-images"], capsys)
    assert code == 0 and len(stdout.splitlines()) == 5

    code, _, err = run(["run-experiment", "--config", str(cfg), "--output-dir", str(out),
                        "--seed", "5"], capsys)
    assert code == 1 and "run_experiment" in err and "refusing" in err


def test_dump_config(tmp_path, capsys):
    path = tmp_path / "c.json"
    code, _, _ = run(["run-experiment", "--seed", "7", "--dump-config", str(path)], capsys)
    assert code == 0 and json.loads(path.read_text())["master_seed"] == 7


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "paramskill", "predict"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr


def test_module_entry_point_success():
    proc = subprocess.run([sys.executable, "-m", "paramskill", "sample-tasks", "--n", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("index,angle,x,y")
