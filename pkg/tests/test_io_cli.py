import json
import shutil
import subprocess
import sys

import pytest

from pwil.cli import main
from pwil.io import JSONLParseError, read_embeddings, read_trajectories, write_embeddings, write_trajectories

from conftest import line_traj


def write_lines(path, xs, episode=0):
    with open(path, "w") as fh:
        for t, x in enumerate(xs):
            fh.write(json.dumps({"episode": episode, "t": t, "obs": [x], "act": None}) + "\n")
    return path


def records(path):
    return [json.loads(line) for line in open(path)]


@pytest.fixture
def trap_files(tmp_path):
    return write_lines(tmp_path / "demos.jsonl", [0, 4, 10]), write_lines(tmp_path / "traj.jsonl", [0, 6, 5])


def test_trajectory_round_trip(tmp_path):
    trajs = [line_traj([0.1, 2.5, -3.0]), line_traj([1e-17, 7.0], episode=1)]
    write_trajectories(trajs, tmp_path / "a.jsonl")
    assert read_trajectories(tmp_path / "a.jsonl") == trajs


def test_points_sorted_by_t(tmp_path):
    path = tmp_path / "a.jsonl"
    path.write_text('{"episode": 0, "t": 1, "obs": [5], "act": null}\n{"episode": 0, "t": 0, "obs": [3], "act": null}\n')
    assert [p.state[0] for p in read_trajectories(path)[0].points] == [3.0, 5.0]


@pytest.mark.parametrize("bad,fragment", [
    ('{"episode": 0, "t": 0, "obs": [1.0]', "invalid JSON"),
    ('{"episode": 0, "t": 0}', "missing field 'obs'"),
    ('{"episode": "x", "t": 0, "obs": [1]}', "'episode' must be an integer"),
    ('[1, 2]', "expected a JSON object"),
    ('{"episode": 0, "t": 0, "obs": [1, "a"], "act": null}', "list of numbers"),
])
def test_malformed_line_reports_line_number(tmp_path, bad, fragment):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"episode": 0, "t": 0, "obs": [0.0], "act": null}\n\n' + bad + "\n")
    with pytest.raises(JSONLParseError, match=rf":3: .*{fragment}"):
        read_trajectories(path)


def test_embedding_round_trip(tmp_path):
    table = {(0, 0): [1.0, 2.0], (0, 1): [3.0, 4.5]}
    write_embeddings(table, tmp_path / "e.jsonl")
    got = read_embeddings(tmp_path / "e.jsonl")
    assert {k: v.tolist() for k, v in got.items()} == table


def test_cli_reward_greedy_trap_totals(trap_files, tmp_path):
    demos, traj = trap_files
    out = tmp_path / "out.jsonl"
    assert main(["reward", "--demos", str(demos), "--traj", str(traj), "--metric", "l2", "--out", str(out)]) == 0
    recs = records(out)
    assert [r["c"] for r in recs[:3]] == pytest.approx([0.0, 2 / 3, 5 / 3], abs=1e-12)
    assert recs[-1]["totals"] is True
    assert recs[-1]["c_total"] == pytest.approx(7 / 3, abs=1e-12)


def test_cli_reward_self_imitation_gives_alpha(trap_files, tmp_path):
    demos, _ = trap_files
    out = tmp_path / "out.jsonl"
    assert main(["reward", "--demos", str(demos), "--traj", str(demos), "--alpha", "2.5", "--out", str(out)]) == 0
    assert [r["r"] for r in records(out) if "r" in r] == [2.5, 2.5, 2.5]


def test_cli_reward_support_variant(trap_files, tmp_path):
    demos, traj = trap_files
    out = tmp_path / "out.jsonl"
    main(["reward", "--demos", str(demos), "--traj", str(traj), "--metric", "l2", "--variant", "support",
          "--out", str(out)])
    assert [r["c"] for r in records(out)[:3]] == pytest.approx([0.0, 2 / 3, 1 / 3], abs=1e-12)


def test_cli_reward_mass_exhaustion(trap_files, tmp_path, capsys):
    demos, _ = trap_files
    long_traj = write_lines(tmp_path / "long.jsonl", [0, 1, 2, 3])
    code = main(["reward", "--demos", str(demos), "--traj", str(long_traj), "--horizon", "3"])
    assert code == 1
    assert "t=3" in capsys.readouterr().err


def test_cli_wdist_same_file_is_zero(trap_files, tmp_path, capsys):
    demos, traj = trap_files
    assert main(["wdist", str(demos), str(demos)]) == 0
    assert json.loads(capsys.readouterr().out)["w1"] == 0.0
    coupling = tmp_path / "c.csv"
    assert main(["wdist", str(traj), str(demos), "--metric", "l2", "--coupling", str(coupling)]) == 0
    assert json.loads(capsys.readouterr().out)["w1"] == pytest.approx(5 / 3, abs=1e-12)
    assert coupling.read_text().splitlines()[0] == "i,j,mass"


def test_cli_bound_check(capsys):
    assert main(["bound-check", "--instances", "50", "--max-t", "10", "--max-d", "10"]) == 0
    assert "violations: 0" in capsys.readouterr().out


def test_cli_demo_gen_and_subsample_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        assert main(["demo-gen", "--env", "grid", "-n", "2", "--seed", "3", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert [t.episode_id for t in read_trajectories(a)] == [0, 1]
    same, sub1, sub2 = tmp_path / "same.jsonl", tmp_path / "s1.jsonl", tmp_path / "s2.jsonl"
    main(["subsample", "--in", str(a), "--rate", "1", "--out", str(same)])
    assert same.read_bytes() == a.read_bytes()
    for path in (sub1, sub2):
        main(["subsample", "--in", str(a), "--rate", "4", "--seed", "9", "--out", str(path)])
    assert sub1.read_bytes() == sub2.read_bytes()
    assert len(read_trajectories(sub1)[0]) == 7


def test_cli_train_writes_report(tmp_path):
    demos = tmp_path / "d.jsonl"
    main(["demo-gen", "--env", "grid", "--out", str(demos)])
    outs = [tmp_path / "r1.csv", tmp_path / "r2.csv"]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"eval_interval": 10, "eval_episodes": 2}))
    for out in outs:
        assert main(["train", "--demos", str(demos), "--episodes", "20", "--rate", "4", "--config", str(cfg),
                     "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    lines = outs[0].read_text().splitlines()
    assert lines[0] == "episode,mean_return,std_return,w1_mean,greedy_bound_mean"
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "10", "20"]


def test_cli_malformed_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"episode": 0, "t": 0, "obs": [0.0], "act": null}\nnot json\n')
    assert main(["wdist", str(bad), str(bad)]) == 1
    assert "bad.jsonl:2:" in capsys.readouterr().err


def test_cli_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alphaa": 1.0}))
    assert main(["train", "--episodes", "0", "--config", str(cfg)]) == 1
    assert "alphaa" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("pwil") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["pwil", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "demo-gen" in out.stdout


def test_module_invocation():
    out = subprocess.run([sys.executable, "-m", "pwil.cli", "bound-check", "--instances", "5"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "violations: 0" in out.stdout
