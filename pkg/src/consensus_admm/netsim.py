"""Deterministic round-synchronous message-passing engine.

Every round, each node emits exactly one message per out-edge; messages are
delivered at the next round, and every node's update sees only its own state
plus its inbox. The engine is a simulator, not a network stack: what it
guarantees are round counts, values, and replayable logs.

A phase of ``R`` rounds is ``R`` exchanges. Seed values enter via
:meth:`RoundEngine.prime`, which also discards messages still pending from a
previous phase (phase boundaries are barriers).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ProtocolViolation
from .graph import Digraph

Handler = Callable[[int, Any, list, int], tuple[Any, dict]]
Emitter = Callable[[int, Any], dict]


def _digest_update(h, obj) -> None:
    if isinstance(obj, np.ndarray):
        h.update(b"a")
        h.update(str(obj.dtype).encode())
        h.update(struct.pack("<%dq" % len(obj.shape), *obj.shape))
        h.update(np.ascontiguousarray(obj).tobytes())
    elif isinstance(obj, (bool, np.bool_)):
        h.update(b"b1" if obj else b"b0")
    elif isinstance(obj, (int, np.integer)):
        h.update(b"i" + str(int(obj)).encode())
    elif isinstance(obj, (float, np.floating)):
        h.update(b"f" + struct.pack("<d", float(obj)))
    elif isinstance(obj, str):
        h.update(b"s" + obj.encode())
    elif obj is None:
        h.update(b"n")
    elif isinstance(obj, (list, tuple)):
        h.update(b"l" + str(len(obj)).encode())
        for item in obj:
            _digest_update(h, item)
    elif hasattr(obj, "__digest__"):
        _digest_update(h, obj.__digest__())
    elif isinstance(obj, dict):
        h.update(b"d" + str(len(obj)).encode())
        for key in sorted(obj):
            _digest_update(h, key)
            _digest_update(h, obj[key])
    elif dataclasses.is_dataclass(obj):
        h.update(b"c" + type(obj).__name__.encode())
        for f in dataclasses.fields(obj):
            _digest_update(h, getattr(obj, f.name))
    else:
        h.update(b"r" + repr(obj).encode())


def stable_digest(obj) -> str:
    """Deterministic short hex digest of nested state (arrays included)."""
    h = hashlib.blake2b(digest_size=12)
    _digest_update(h, obj)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class RoundRecord:
    """One append-only log entry: a seed emission or a full exchange."""

    tick: int
    phase: str
    kind: str  # "seed" or "exchange"
    message_count: int
    digests: tuple[str, ...]
    messages: list | None = None


@dataclass
class RoundEngine:
    """Hosts node state machines over a fixed digraph, one round at a time."""

    graph: Digraph
    states: list
    record_messages: bool = False
    parallel: bool = False
    tick: int = 0
    log: list[RoundRecord] = field(default_factory=list)
    _pending: list[list[tuple[int, Any]]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.states) != self.graph.n:
            raise ValueError("one state per node required")
        self._pending = [[] for _ in range(self.graph.n)]
        self._out_sets = [set(outs) for outs in self.graph.out_neighbors]

    # -- helpers ---------------------------------------------------------

    def _validate_outbox(self, sender: int, outbox: dict) -> None:
        keys = set(outbox)
        if keys != self._out_sets[sender]:
            extra = keys - self._out_sets[sender]
            missing = self._out_sets[sender] - keys
            raise ProtocolViolation(
                f"node {sender}: sent to non-edges {sorted(extra)}, "
                f"omitted edges {sorted(missing)}")

    def _enqueue(self, outboxes: list[dict]) -> tuple[int, list]:
        pending: list[list[tuple[int, Any]]] = [[] for _ in range(self.graph.n)]
        captured = [] if self.record_messages else None
        count = 0
        for sender, outbox in enumerate(outboxes):
            self._validate_outbox(sender, outbox)
            for receiver in self.graph.out_neighbors[sender]:
                pending[receiver].append((sender, outbox[receiver]))
                count += 1
                if captured is not None:
                    captured.append([sender, receiver, _jsonable(outbox[receiver])])
        self._pending = pending
        return count, captured

    def _snapshot_digests(self) -> tuple[str, ...]:
        return tuple(stable_digest(s) for s in self.states)

    # -- public API ------------------------------------------------------

    def prime(self, emitter: Emitter, phase: str = "") -> RoundRecord:
        """Start a phase: drop stale messages, emit seed messages.

        ``emitter(i, state) -> outbox`` must cover node i's out-edges exactly,
        like any round's emission.
        """
        outboxes = [emitter(i, self.states[i]) for i in range(self.graph.n)]
        count, captured = self._enqueue(outboxes)
        record = RoundRecord(self.tick, phase, "seed", count,
                             self._snapshot_digests(), captured)
        self.log.append(record)
        return record

    def run_round(self, handler: Handler, phase: str = "") -> RoundRecord:
        """Deliver pending messages, update every node, emit the next wave.

        All inboxes are complete before any update runs, and updates read
        only the previous-round snapshot: handlers receive exactly
        ``(node, own state, inbox, round index)``.
        """
        inboxes = [sorted(box, key=lambda m: m[0]) for box in self._pending]
        self.tick += 1
        tick = self.tick

        def work(i: int):
            return handler(i, self.states[i], inboxes[i], tick)

        if self.parallel and self.graph.n > 1:
            with ThreadPoolExecutor() as pool:
                results = list(pool.map(work, range(self.graph.n)))
        else:
            results = [work(i) for i in range(self.graph.n)]

        outboxes = []
        for i, (new_state, outbox) in enumerate(results):
            self.states[i] = new_state
            outboxes.append(outbox)
        count, captured = self._enqueue(outboxes)
        record = RoundRecord(tick, phase, "exchange", count,
                             self._snapshot_digests(), captured)
        self.log.append(record)
        return record

    def run_phase(self, handler: Handler, rounds: int, phase: str = "") -> None:
        """Execute exactly ``rounds`` exchanges under one phase label."""
        for _ in range(rounds):
            self.run_round(handler, phase)

    def export_jsonl(self, path) -> None:
        """One JSON record per log entry."""
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.log:
                row = {
                    "tick": rec.tick,
                    "phase": rec.phase,
                    "kind": rec.kind,
                    "message_count": rec.message_count,
                    "digests": list(rec.digests),
                }
                if rec.messages is not None:
                    row["messages"] = rec.messages
                fh.write(json.dumps(row) + "\n")


def phase_lengths(log: list[RoundRecord]) -> list[tuple[str, int]]:
    """Exchange counts per phase label, in first-appearance order."""
    order: list[str] = []
    counts: dict[str, int] = {}
    for rec in log:
        if rec.phase not in counts:
            order.append(rec.phase)
            counts[rec.phase] = 0
        if rec.kind == "exchange":
            counts[rec.phase] += 1
    return [(name, counts[name]) for name in order]
