"""Drives the real server process over pipes, speaking the protocol raw."""

import json
import subprocess
import sys

import pytest

from reference_evaluator import ToyModel, ToyModelParams

SPACE = {
    "group_size": 128,
    "scale_bits": 16,
    "zero_bits": 16,
    "layers": [
        {"name": f"blk.{i}.mod", "params": 100, "choices": [2, 3, 4]} for i in range(6)
    ],
}


@pytest.fixture
def params_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(
        json.dumps(
            {
                "vocab_size": 32,
                "num_tokens": 16,
                "seed": 9,
                "bit_scale": {"2": 1.0, "3": 0.3, "4": 0.05},
            }
        )
    )
    return path


def spawn(params_file, *extra):
    return subprocess.Popen(
        [sys.executable, "-m", "reference_evaluator", "--model", str(params_file), *extra],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )


def send(proc, obj):
    proc.stdin.write(json.dumps(obj) + "\n")
    proc.stdin.flush()


def recv(proc):
    line = proc.stdout.readline()
    assert line, "server closed stdout unexpectedly"
    return json.loads(line)


def handshake(proc):
    send(proc, {"type": "init", "protocol": 1, "space": SPACE})
    reply = recv(proc)
    assert reply == {"type": "ready", "layers": 6}


def test_handshake_and_shutdown(params_file):
    proc = spawn(params_file)
    handshake(proc)
    send(proc, {"type": "shutdown"})
    assert proc.wait(timeout=10) == 0


def test_scores_match_in_process_model(params_file):
    proc = spawn(params_file)
    try:
        handshake(proc)
        configs = [[2, 3, 4, 2, 3, 4], [4, 4, 4, 4, 4, 4], [2, 2, 2, 2, 2, 2]]
        send(proc, {"type": "evaluate", "id": 5, "configs": configs})
        reply = recv(proc)
        assert reply["type"] == "result" and reply["id"] == 5

        params = ToyModelParams.from_file(params_file)
        model = ToyModel(params, n_layers=6, choices={2, 3, 4})
        expected = [model.score(tuple(c)) for c in configs]
        assert reply["scores"] == pytest.approx(expected, abs=1e-15)
    finally:
        send(proc, {"type": "shutdown"})
        proc.wait(timeout=10)


def test_reorder_mode_reverses_ids(params_file):
    proc = spawn(params_file, "--reorder", "3")
    try:
        handshake(proc)
        for req_id in (1, 2, 3):
            send(proc, {"type": "evaluate", "id": req_id, "configs": [[2] * 6]})
        ids = [recv(proc)["id"] for _ in range(3)]
        assert ids == [3, 2, 1]
    finally:
        send(proc, {"type": "shutdown"})
        proc.wait(timeout=10)


def test_malformed_line_yields_error_response(params_file):
    proc = spawn(params_file)
    try:
        handshake(proc)
        proc.stdin.write("{broken json\n")
        proc.stdin.flush()
        reply = recv(proc)
        assert reply["type"] == "error"
        # the stream stays usable afterwards
        send(proc, {"type": "evaluate", "id": 1, "configs": [[3] * 6]})
        assert recv(proc)["type"] == "result"
    finally:
        send(proc, {"type": "shutdown"})
        proc.wait(timeout=10)


def test_wrong_layer_count_errors_and_exits(params_file, tmp_path):
    # a model pinned to 4 layers refuses a 6-layer space at handshake
    pinned = tmp_path / "pinned.json"
    pinned.write_text(
        json.dumps(
            {
                "vocab_size": 32,
                "num_tokens": 16,
                "seed": 1,
                "bit_scale": {"2": 1.0, "3": 0.3, "4": 0.05},
                "layer_scale": [1.0, 1.0, 1.0, 1.0],
            }
        )
    )
    proc = spawn(pinned)
    send(proc, {"type": "init", "protocol": 1, "space": SPACE})
    reply = recv(proc)
    assert reply["type"] == "error"
    assert proc.wait(timeout=10) == 1


def test_evaluate_before_init_is_error(params_file):
    proc = spawn(params_file)
    try:
        send(proc, {"type": "evaluate", "id": 1, "configs": [[2] * 6]})
        reply = recv(proc)
        assert reply["type"] == "error" and "init" in reply["message"]
    finally:
        proc.kill()
        proc.wait()


def test_bad_config_length_is_error(params_file):
    proc = spawn(params_file)
    try:
        handshake(proc)
        send(proc, {"type": "evaluate", "id": 2, "configs": [[2, 3]]})
        reply = recv(proc)
        assert reply["type"] == "error" and reply["id"] == 2
    finally:
        send(proc, {"type": "shutdown"})
        proc.wait(timeout=10)


def test_unsupported_protocol_version(params_file):
    proc = spawn(params_file)
    send(proc, {"type": "init", "protocol": 99, "space": SPACE})
    reply = recv(proc)
    assert reply["type"] == "error"
    assert proc.wait(timeout=10) == 1
