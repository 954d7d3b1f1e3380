import json

import pytest

from conftest import DEAD_URL
from photoloop.analysis import synthetic_photo
from photoloop.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main
from photoloop.core import content_hash, read_image, write_image

FAST = "[planner]\nbudget = 4\ndepth = 2\ntop_k = 2\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "fast.toml"
    p.write_text(FAST)
    return str(p)


@pytest.fixture
def img(tmp_path):
    p = tmp_path / "in.png"
    write_image(synthetic_photo(1, 48, 64), p)
    return str(p)


def test_edit_happy_path(tmp_path, cfg, img, capsys):
    out = tmp_path / "o"
    assert main(["edit", img, "--config", cfg, "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "trajectory.json").read_text())
    n = len(doc["states"])
    assert all((out / f"state_{i}.png").exists() for i in range(n)) and (out / "final.png").exists()
    assert doc["termination_reason"] in {"MaxIterations", "NoImprovement", "Fixpoint", "NoActions"}
    assert doc["final_aggregate"] >= doc["initial_aggregate"]
    assert "Terminated" in capsys.readouterr().out


def test_edit_prompt_recorded(tmp_path, cfg, img):
    out = tmp_path / "o"
    assert main(["edit", img, "--config", cfg, "--out", str(out), "--prompt", "warmer mood"]) == EXIT_OK
    assert json.loads((out / "trajectory.json").read_text())["user_prompt"] == "warmer mood"


def test_bad_config_exit_2(tmp_path, img, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[planner]\nbudget = 0\n")
    assert main(["edit", img, "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "planner.budget" in capsys.readouterr().err


def test_unreadable_input_exit_3(tmp_path, cfg):
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not a png")
    assert main(["edit", str(junk), "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert main(["edit", str(tmp_path / "missing.png"), "--config", cfg]) == EXIT_INPUT


def _batch_dir(tmp_path, n=4, corrupt=True):
    d = tmp_path / "in"
    d.mkdir()
    for i in range(n):
        write_image(synthetic_photo(i, 40, 48), d / f"im{i}.png")
    if corrupt:
        (d / "zz_corrupt.png").write_bytes(b"\x89PNG broken")
    return d


def test_batch_isolates_corrupt_file(tmp_path, cfg):
    d, out = _batch_dir(tmp_path, 3), tmp_path / "o"
    assert main(["batch", str(d), "--config", cfg, "--out", str(out)]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert (s["succeeded"], s["failed"]) == (3, 1)
    bad = [e for e in s["entries"] if e["status"] == "failed"]
    assert bad[0]["input"] == "zz_corrupt.png" and bad[0]["exit_code"] == EXIT_INPUT


def test_batch_empty_dir(tmp_path, cfg):
    (tmp_path / "empty").mkdir()
    assert main(["batch", str(tmp_path / "empty"), "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["entries"] == []


def test_batch_parallelism_does_not_change_results(tmp_path, cfg):
    d = _batch_dir(tmp_path, 4, corrupt=False)
    digests = []
    for par in (1, 4):
        out = tmp_path / f"o{par}"
        assert main(["batch", str(d), "--config", cfg, "--out", str(out), "--parallel", str(par)]) == EXIT_OK
        digests.append([content_hash(read_image(out / f"im{i}" / "final.png")) for i in range(4)])
    assert digests[0] == digests[1]


def test_dead_endpoint_still_edits(tmp_path, img):
    p = tmp_path / "dead.toml"
    p.write_text(FAST + f'[endpoints.ed]\nurl = "{DEAD_URL}"\nretries = 0\ntimeout = 0.5\n'
                 '[routing.routes]\nGlobalTone = ["ed", "procedural"]\n')
    assert main(["edit", img, "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_bench_budget_sweep(tmp_path, capsys):
    assert main(["bench", "--budgets", "5,10", "--seeds", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert "Budget" in capsys.readouterr().out
    assert set(json.loads((tmp_path / "bench_budgets.json").read_text())["mean_reward"]) == {"5", "10"}


def test_bench_strategies_json(capsys, cfg):
    assert main(["bench", "--env", "harmful", "--config", cfg, "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc


def test_sim2real_full_scale(capsys):
    assert main(["sim2real", "--images", "2", "--candidates", "4", "--scales", "full", "--json"]) == EXIT_OK
    r = json.loads(capsys.readouterr().out)["reports"][0]
    assert r["spearman"] == 1.0 and r["top1_retention"] == 1.0


def test_profile(capsys, cfg):
    assert main(["profile", "--config", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Planner (MCTS)" in out and "Total" in out
