import json

import numpy as np
import pytest

from bitpareto.cli import main

from helpers import make_space


@pytest.fixture
def workdir(tmp_path):
    """A space file and a synthetic-evaluator params file ready to use."""
    space = make_space(8)
    space_path = tmp_path / "space.json"
    space_path.write_text(json.dumps(space.to_dict()))

    rng = np.random.default_rng(0)
    model = {
        "kind": "separable",
        "weights": list(rng.uniform(0.5, 5.0, 8)),
        "penalty": {"2": 1.0, "3": 0.3, "4": 0.1},
    }
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(model))
    return tmp_path, space_path, model_path


def run_cli(*args):
    return main([str(a) for a in args])


def test_search_defaults_match_documented_values():
    from bitpareto.cli import _build_parser

    parser = _build_parser()
    args = parser.parse_args(
        ["search", "--space", "s.json", "--evaluator", "synthetic:m.json"]
    )
    assert args.iterations == 200
    assert args.initial == 250
    assert args.candidates == 50
    assert args.population == 200
    assert args.generations == 20
    assert args.crossover == 0.9
    assert args.mutation == 0.1
    assert args.subset_pool == 100
    assert args.tolerance == 0.005


def test_missing_space_file(tmp_path, capsys):
    code = run_cli(
        "sensitivity",
        "--space", tmp_path / "nope.json",
        "--evaluator", "synthetic:also-missing.json",
        "--out", tmp_path / "out",
    )
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def test_bad_evaluator_spec(workdir, capsys):
    tmp_path, space_path, _ = workdir
    code = run_cli(
        "sensitivity", "--space", space_path, "--evaluator", "whatever",
        "--out", tmp_path / "out",
    )
    assert code == 2


def test_sensitivity_command(workdir, capsys):
    tmp_path, space_path, model_path = workdir
    # plant an outlier: rewrite the model with one dominant weight
    model = json.loads(model_path.read_text())
    model["weights"] = [1.0] * 7 + [10.15]
    model["penalty"] = {"2": 1.0, "3": 0.3, "4": 0.001}
    model_path.write_text(json.dumps(model))

    out = tmp_path / "sens"
    code = run_cli(
        "sensitivity", "--space", space_path,
        "--evaluator", f"synthetic:{model_path}", "--out", out,
    )
    assert code == 0
    report = json.loads((out / "profile.json").read_text())
    assert report["frozen"] == ["blk.7.mod"]
    assert report["excluded_fraction"] == pytest.approx(1 / 8)
    printed = capsys.readouterr().out
    assert "12.50%" in printed  # 1/8 with two decimals
    for m in ("1.5", "2", "3", "5"):
        assert f"multiplier  {m}" in printed or f"multiplier {m}" in printed


def test_search_command_outputs(workdir):
    tmp_path, space_path, model_path = workdir
    out = tmp_path / "run1"
    code = run_cli(
        "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--seed", 3, "--initial", 40, "--iterations", 4, "--candidates", 10,
        "--population", 20, "--generations", 5, "--subset-pool", 15,
        "--target-bits", "2.75,3.25", "--out", out,
    )
    assert code == 0
    assert (out / "archive.jsonl").exists()
    assert (out / "front.json").exists()
    assert (out / "manifest.json").exists()
    for tag in ("2.75", "3.25"):
        selected = json.loads((out / f"selected_{tag}.json").read_text())
        assert abs(selected["eff_bits"] - float(tag)) <= 0.005
        alloc = (out / f"allocation_{tag}.csv").read_text().splitlines()
        assert alloc[0] == "layer,module,bits"
        assert len(alloc) == 1 + 8


def test_search_deterministic_bytes(workdir):
    tmp_path, space_path, model_path = workdir
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = run_cli(
            "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
            "--seed", 11, "--initial", 30, "--iterations", 3, "--candidates", 8,
            "--population", 16, "--generations", 4, "--subset-pool", 12, "--out", out,
        )
        assert code == 0
        outs.append(out)
    a, b = outs
    assert (a / "archive.jsonl").read_bytes() == (b / "archive.jsonl").read_bytes()
    assert (a / "front.json").read_bytes() == (b / "front.json").read_bytes()


def test_front_json_round_trips(workdir):
    tmp_path, space_path, model_path = workdir
    out = tmp_path / "run2"
    run_cli(
        "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--seed", 5, "--initial", 25, "--iterations", 2, "--candidates", 6,
        "--population", 12, "--generations", 3, "--subset-pool", 10, "--out", out,
    )
    front_path = out / "front.json"
    records = json.loads(front_path.read_text())
    re_emitted = json.dumps(records, indent=2) + "\n"
    assert re_emitted == front_path.read_text()


def test_baseline_greedy_counts(workdir):
    tmp_path, space_path, model_path = workdir
    # 10-layer space for the 10+9+...+1 = 55 count
    space10 = make_space(10)
    space10_path = tmp_path / "space10.json"
    space10_path.write_text(json.dumps(space10.to_dict()))
    model = json.loads(model_path.read_text())
    model["weights"] = list(np.linspace(1, 3, 10))
    model10 = tmp_path / "model10.json"
    model10.write_text(json.dumps(model))

    out = tmp_path / "base"
    code = run_cli(
        "baseline", "--space", space10_path, "--evaluator", f"synthetic:{model10}",
        "--method", "greedy", "--target-bits", "2.25", "--out", out,
    )
    assert code == 0
    record = json.loads((out / "baseline_greedy_2.25.json").read_text())
    assert record["search_evaluations"] == 55
    assert record["eff_bits"] == pytest.approx(2.25)


def test_baseline_one_shot_zero_search_cost(workdir):
    tmp_path, space_path, model_path = workdir
    out = tmp_path / "oneshot"
    code = run_cli(
        "baseline", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--method", "one-shot", "--target-bits", "3.25", "--out", out,
    )
    assert code == 0
    record = json.loads((out / "baseline_one-shot_3.25.json").read_text())
    assert record["search_evaluations"] == 0
    assert record["profile_evaluations"] == 8
    assert record["eff_bits"] == pytest.approx(3.25)


def test_oracle_command(workdir, capsys):
    tmp_path, space_path, model_path = workdir
    run = tmp_path / "run3"
    code = run_cli(
        "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--seed", 0, "--initial", 60, "--iterations", 6, "--candidates", 15,
        "--population", 30, "--generations", 8, "--subset-pool", 20, "--out", run,
    )
    assert code == 0
    out = tmp_path / "oracle"
    code = run_cli(
        "oracle", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--front", run / "front.json", "--check-transform", "increasing", "--out", out,
    )
    assert code == 0
    payload = json.loads((out / "oracle.json").read_text())
    assert payload["comparison"]["hypervolume_ratio"] >= 0.99
    assert payload["coincidence"]["coincident"] is True
    printed = capsys.readouterr().out
    assert "coincident: true" in printed


def test_oracle_reversed_transform(workdir, capsys):
    tmp_path, space_path, model_path = workdir
    out = tmp_path / "oracle-rev"
    code = run_cli(
        "oracle", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--check-transform", "reversed", "--out", out,
    )
    assert code == 0
    payload = json.loads((out / "oracle.json").read_text())
    assert payload["coincidence"]["coincident"] is False
    assert "coincident: false" in capsys.readouterr().out


def test_report_renders_figures(workdir):
    tmp_path, space_path, model_path = workdir
    run = tmp_path / "run4"
    run_cli(
        "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--seed", 1, "--initial", 30, "--iterations", 3, "--candidates", 8,
        "--population", 16, "--generations", 4, "--subset-pool", 12,
        "--target-bits", "3.25", "--out", run,
    )
    code = run_cli("report", "--run", run)
    assert code == 0
    assert (run / "front.png").exists()
    assert (run / "convergence.png").exists()
    assert (run / "allocation_3.25.png").exists()


def test_report_empty_dir(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = run_cli("report", "--run", empty)
    assert code == 1


def test_search_resume(workdir):
    tmp_path, space_path, model_path = workdir
    out = tmp_path / "resumable"
    args = [
        "search", "--space", space_path, "--evaluator", f"synthetic:{model_path}",
        "--seed", 4, "--initial", 20, "--iterations", 3, "--candidates", 5,
        "--population", 12, "--generations", 3, "--subset-pool", 10, "--out", out,
    ]
    assert run_cli(*args) == 0
    # resuming a finished run is a no-op that still rewrites outputs
    assert run_cli(*args, "--resume", out) == 0
