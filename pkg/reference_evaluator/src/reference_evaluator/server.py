"""JSON-Lines stdio server: init/ready handshake, evaluate/result loop.

One JSON object per line.  The init message carries the search-space
description; the server builds its toy model against that layer count and
answers every evaluate request with one result carrying scores aligned to
the request's configs.  Request ids are echoed, so responses remain
matchable even when the --reorder test mode delays and reverses them.
"""

from __future__ import annotations

import argparse
import json
import sys

from .model import ToyModel, ToyModelParams

PROTOCOL_VERSION = 1


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _error(req_id: int, message: str) -> None:
    _emit({"type": "error", "id": req_id, "message": message})


def serve(params: ToyModelParams, reorder: int = 0) -> int:
    """Run the request loop until shutdown or EOF; returns the exit code."""
    model: ToyModel | None = None
    held: list[dict] = []

    def flush_held():
        for msg in reversed(held):
            _respond(msg)
        held.clear()

    def _respond(msg: dict) -> None:
        scores = [model.score(cfg) for cfg in msg["configs"]]
        _emit({"type": "result", "id": msg["id"], "scores": scores})

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            _error(-1, f"malformed request line: {line[:80]!r}")
            continue
        kind = msg.get("type")

        if kind == "init":
            if msg.get("protocol") != PROTOCOL_VERSION:
                _error(-1, f"unsupported protocol {msg.get('protocol')!r}")
                return 1
            space = msg.get("space", {})
            layers = space.get("layers", [])
            choices = {int(b) for layer in layers for b in layer.get("choices", [])}
            try:
                model = ToyModel(params, n_layers=len(layers), choices=choices)
            except ValueError as exc:
                _error(-1, str(exc))
                return 1
            _emit({"type": "ready", "layers": len(layers)})

        elif kind == "evaluate":
            req_id = int(msg.get("id", -1))
            if model is None:
                _error(req_id, "evaluate before init")
                continue
            configs = msg.get("configs")
            if not isinstance(configs, list):
                _error(req_id, "evaluate needs a configs list")
                continue
            bad = [c for c in configs if len(c) != model.n_layers]
            if bad:
                _error(req_id, f"config length {len(bad[0])} != {model.n_layers} layers")
                continue
            if reorder > 0:
                held.append(msg)
                if len(held) >= reorder:
                    flush_held()
            else:
                _respond(msg)

        elif kind == "shutdown":
            flush_held()
            return 0

        else:
            _error(int(msg.get("id", -1)), f"unknown message type {kind!r}")

    flush_held()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="reference-evaluator",
        description="toy stdio evaluator speaking the JSONL scoring protocol",
    )
    parser.add_argument("--model", required=True, help="model params JSON file")
    parser.add_argument(
        "--reorder",
        type=int,
        default=0,
        metavar="N",
        help="test mode: buffer N requests and answer them in reverse order",
    )
    args = parser.parse_args(argv)
    try:
        params = ToyModelParams.from_file(args.model)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot load model params: {exc}", file=sys.stderr)
        return 1
    return serve(params, reorder=args.reorder)


if __name__ == "__main__":
    sys.exit(main())
