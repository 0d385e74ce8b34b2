"""Client for out-of-process evaluators speaking JSON Lines over stdio.

The child process receives one JSON object per line on stdin and answers
on stdout.  After an init/ready handshake that pins the layer count,
every evaluate request carries an id; responses echo the id and may come
back in any order.  The client enforces a per-request timeout and, if the
process dies, restarts it once and re-sends whatever was unanswered.
"""

from __future__ import annotations

import json
import os
import selectors
import shlex
import subprocess
import time
from typing import Sequence

from .evaluators import Evaluator, EvaluatorError
from .space import BitConfig, SearchSpace

PROTOCOL_VERSION = 1


class ProtocolError(EvaluatorError):
    """The child violated the wire protocol or reported an error."""


class HandshakeError(ProtocolError):
    """Init/ready exchange failed (e.g. layer-count disagreement)."""


class EvaluatorTimeout(EvaluatorError):
    """The child did not answer within the configured timeout."""


class ExternalEvaluator(Evaluator):
    """Drives one child evaluator process over the JSONL protocol.

    chunk_size=None sends each batch as a single request (letting the
    child amortize model-assembly cost); a positive chunk_size splits
    batches into pipelined requests whose responses are matched by id.
    """

    def __init__(
        self,
        command: str | Sequence[str],
        space: SearchSpace,
        timeout: float = 600.0,
        chunk_size: int | None = None,
        max_restarts: int = 1,
    ):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.space = space
        self.timeout = timeout
        self.chunk_size = chunk_size
        self.max_restarts = max_restarts
        self._proc: subprocess.Popen | None = None
        self._buffer = bytearray()
        self._next_id = 0
        self._start()

    # -- process lifecycle ----------------------------------------------

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise EvaluatorError(f"cannot spawn evaluator {self.command}: {exc}") from exc
        self._buffer = bytearray()
        self._handshake()

    def _handshake(self) -> None:
        self._send({"type": "init", "protocol": PROTOCOL_VERSION, "space": self.space.to_dict()})
        reply = self._read_message(time.monotonic() + self.timeout)
        if reply.get("type") != "ready":
            raise HandshakeError(f"expected ready, got {reply!r}")
        layers = reply.get("layers")
        if layers != len(self.space.layers):
            raise HandshakeError(
                f"evaluator reports {layers} layers, space has {len(self.space.layers)}"
            )

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        self._proc = None
        try:
            if proc.poll() is None:
                proc.stdin.write(b'{"type": "shutdown"}\n')
                proc.stdin.flush()
                proc.stdin.close()
                proc.wait(timeout=5.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # -- wire I/O ----------------------------------------------------------

    def _send(self, obj: dict) -> None:
        proc = self._proc
        if proc is None or proc.poll() is not None:
            raise BrokenPipeError("evaluator process is not running")
        line = json.dumps(obj) + "\n"
        try:
            proc.stdin.write(line.encode())
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BrokenPipeError(str(exc)) from exc

    def _read_message(self, deadline: float) -> dict:
        """Read one JSON line, honoring the deadline; EOF means a dead child."""
        sel = selectors.DefaultSelector()
        sel.register(self._proc.stdout, selectors.EVENT_READ)
        try:
            while True:
                nl = self._buffer.find(b"\n")
                if nl >= 0:
                    raw = bytes(self._buffer[:nl])
                    del self._buffer[: nl + 1]
                    if not raw.strip():
                        continue
                    try:
                        return json.loads(raw)
                    except json.JSONDecodeError as exc:
                        raise ProtocolError(f"malformed response line: {raw!r}") from exc
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise EvaluatorTimeout(
                        f"no response within {self.timeout} s from {self.command}"
                    )
                if not sel.select(timeout=remaining):
                    continue
                chunk = os.read(self._proc.stdout.fileno(), 65536)
                if not chunk:
                    raise BrokenPipeError("evaluator closed its stdout")
                self._buffer.extend(chunk)
        finally:
            sel.close()

    # -- evaluation ----------------------------------------------------------

    def evaluate_batch(self, configs: Sequence[BitConfig]) -> list[float]:
        if not configs:
            return []
        payloads = [list(c.bits) for c in configs]
        if self.chunk_size is None:
            chunks = [payloads]
        else:
            chunks = [
                payloads[i : i + self.chunk_size]
                for i in range(0, len(payloads), self.chunk_size)
            ]
        restarts_left = self.max_restarts
        while True:
            try:
                return self._run_round(chunks)
            except BrokenPipeError as exc:
                if restarts_left <= 0:
                    raise EvaluatorError(
                        f"evaluator died and restart budget exhausted: {exc}"
                    ) from exc
                restarts_left -= 1
                self._restart()

    def _restart(self) -> None:
        proc = self._proc
        self._proc = None
        if proc is not None:
            proc.kill()
            proc.wait()
        self._start()

    def _run_round(self, chunks: list[list[list[int]]]) -> list[float]:
        pending: dict[int, int] = {}  # request id -> chunk position
        for pos, chunk in enumerate(chunks):
            req_id = self._next_id
            self._next_id += 1
            self._send({"type": "evaluate", "id": req_id, "configs": chunk})
            pending[req_id] = pos

        results: dict[int, list[float]] = {}
        deadline = time.monotonic() + self.timeout
        while pending:
            msg = self._read_message(deadline)
            kind = msg.get("type")
            if kind == "error":
                raise ProtocolError(
                    f"evaluator error for request {msg.get('id')}: {msg.get('message')}"
                )
            if kind != "result":
                raise ProtocolError(f"unexpected message type {kind!r}")
            msg_id = msg.get("id")
            if msg_id not in pending:
                raise ProtocolError(f"response for unknown request id {msg_id}")
            pos = pending.pop(msg_id)
            scores = msg.get("scores")
            if not isinstance(scores, list) or len(scores) != len(chunks[pos]):
                raise ProtocolError(
                    f"request {msg_id}: expected {len(chunks[pos])} scores, "
                    f"got {scores!r}"
                )
            results[pos] = [float(s) for s in scores]

        out: list[float] = []
        for pos in range(len(chunks)):
            out.extend(results[pos])
        return out


def external_evaluator(
    command: str | Sequence[str],
    space: SearchSpace,
    timeout: float = 600.0,
    chunk_size: int | None = None,
) -> ExternalEvaluator:
    """Spawn the command, perform the handshake, and return the evaluator."""
    return ExternalEvaluator(command, space, timeout=timeout, chunk_size=chunk_size)
