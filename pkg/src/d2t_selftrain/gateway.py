"""Uniform interface to data-to-text and text-to-data models.

Two backends share one operation surface (generate_batch, train_batch,
checkpoint): deterministic rule-based baselines that make the whole pipeline
runnable on a desk, and a client for external trainable model servers
speaking newline-delimited JSON over TCP.

Wire protocol, one JSON object per line, UTF-8:
  request  {"id": n, "cmd": "generate"|"train"|"save"|"load"|"shutdown", ...}
  response {"id": n, "ok": true|false, ...}
ids are strictly increasing per connection with one request in flight at a
time. Payload fields: inputs/max_len/min_len -> outputs (generate),
pairs -> loss (train), tag (save/load), error (any failure).
"""

from __future__ import annotations

import enum
import json
import socket
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .errors import DelinearizeError, GatewayError
from .linearize import delinearize, render_records
from .records import (
    Mr,
    RecordKind,
    RecordSet,
    Triple,
    normalize_text,
    record_key,
)


class Direction(enum.Enum):
    D2T = "d2t"
    T2D = "t2d"


class Backend(enum.Enum):
    RULE_BASED = "rule-based"
    EXTERNAL = "external"


class CheckpointAction(enum.Enum):
    SAVE = "save"
    LOAD = "load"


@dataclass(frozen=True)
class DecodeLimits:
    max_len: int = 256
    min_len: int = 4


@dataclass(frozen=True)
class TrainAck:
    loss: Optional[float] = None


def _phrase(field_name: str) -> str:
    """Surface form of a predicate or MR key: lowercased, underscores as spaces."""
    return field_name.lower().replace("_", " ")


def infer_record_set(text: str) -> Optional[RecordSet]:
    """Parse a linearized string whose variant is unknown, preferring the
    interpretation that drops fewer segments (tripleset on ties)."""
    best = None
    for kind in (RecordKind.TRIPLESET, RecordKind.MR_SET):
        try:
            res = delinearize(text, kind)
        except DelinearizeError:
            continue
        if best is None or res.dropped < best.dropped:
            best = res
    return None if best is None else best.record_set


class RuleBasedD2T:
    """Deterministic template renderer standing in for a D2T model.

    Each record becomes one sentence: "<subject> <predicate phrase> <object>."
    for triples, "<name value> <key phrase> <value>." for MR pairs (the name
    pair supplies the subject and is not rendered on its own).
    """

    def generate(self, source_text: str) -> str:
        rs = infer_record_set(source_text)
        if rs is None:
            return ""
        if rs.kind is RecordKind.TRIPLESET:
            sentences = [
                f"{t.subject} {_phrase(t.predicate)} {t.object}." for t in rs.records
            ]
        else:
            name = next(
                (m.value for m in rs.records if m.key.casefold() == "name"), None
            )
            others = [m for m in rs.records if m.key.casefold() != "name"]
            if name is None:
                sentences = [f"{_phrase(m.key)} {m.value}." for m in rs.records]
            elif not others:
                sentences = [f"{name}."]
            else:
                sentences = [f"{name} {_phrase(m.key)} {m.value}." for m in others]
        return " ".join(sentences)


@dataclass(frozen=True)
class _CatalogEntry:
    record: Union[Triple, Mr]
    values: tuple[str, ...]  # case-folded evidence values
    evidence: Optional[str]  # case-folded predicate/key phrase; None = values suffice


def _find_bounded(text: str, phrase: str, consumed: Sequence[tuple[int, int]]) -> Optional[int]:
    """Leftmost word-bounded occurrence of `phrase` avoiding consumed spans."""
    start = 0
    while True:
        i = text.find(phrase, start)
        if i == -1:
            return None
        end = i + len(phrase)
        bounded = (i == 0 or not text[i - 1].isalnum()) and (
            end == len(text) or not text[end].isalnum()
        )
        if bounded and all(end <= s or i >= e for s, e in consumed):
            return i
        start = i + 1


class RuleBasedT2D:
    """Deterministic record extractor standing in for a T2D model.

    Holds a catalog of known records. A record is recovered from a text when
    all of its values occur word-bounded (values matched longest-first with
    span consumption, so "New York" shadows "York") and its predicate/key
    phrase also occurs; the MR name pair needs only its value. Recovered
    records are emitted in text order as a linearized string, or "" when
    nothing is recoverable.
    """

    def __init__(self, record_sets: Sequence[RecordSet]):
        if not record_sets:
            raise ValueError("catalog needs at least one record set")
        kinds = {rs.kind for rs in record_sets}
        if len(kinds) != 1:
            raise ValueError("catalog record sets must share one variant")
        self.kind = kinds.pop()
        entries: dict[tuple, _CatalogEntry] = {}
        for rs in record_sets:
            for r in rs.records:
                key = record_key(r)
                if key in entries:
                    continue
                if isinstance(r, Triple):
                    entries[key] = _CatalogEntry(
                        r,
                        (r.subject.casefold(), r.object.casefold()),
                        _phrase(r.predicate).casefold(),
                    )
                elif r.key.casefold() == "name":
                    entries[key] = _CatalogEntry(r, (r.value.casefold(),), None)
                else:
                    entries[key] = _CatalogEntry(
                        r, (r.value.casefold(),), _phrase(r.key).casefold()
                    )
        self._entries = tuple(entries.values())

    @classmethod
    def from_examples(cls, examples) -> "RuleBasedT2D":
        return cls([ex.source for ex in examples])

    def generate(self, text: str) -> str:
        norm = normalize_text(text).casefold()
        if not norm:
            return ""
        positions: dict[str, int] = {}
        consumed: list[tuple[int, int]] = []
        values = {v for e in self._entries for v in e.values}
        for v in sorted(values, key=lambda v: (-len(v), v)):
            pos = _find_bounded(norm, v, consumed)
            if pos is not None:
                positions[v] = pos
                consumed.append((pos, pos + len(v)))
        chosen: list[tuple[int, int, Union[Triple, Mr]]] = []
        for idx, e in enumerate(self._entries):
            if all(v in positions for v in e.values) and (
                e.evidence is None or _find_bounded(norm, e.evidence, ()) is not None
            ):
                chosen.append((min(positions[v] for v in e.values), idx, e.record))
        if not chosen:
            return ""
        chosen.sort(key=lambda t: (t[0], t[1]))
        return render_records([r for _, _, r in chosen])


RuleModel = Union[RuleBasedD2T, RuleBasedT2D]

_REQUEST_TIMEOUT = 600.0


class _Connection:
    """One NDJSON client connection: strictly increasing ids, one in flight."""

    def __init__(self, endpoint: str):
        host, port = _parse_endpoint(endpoint)
        try:
            self._sock = socket.create_connection((host, port), timeout=_REQUEST_TIMEOUT)
        except OSError as exc:
            raise GatewayError(f"cannot connect to model server at {endpoint}: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
        self._next_id = 1

    def request(self, cmd: str, **payload) -> dict:
        rid = self._next_id
        self._next_id += 1
        try:
            self._writer.write(json.dumps({"id": rid, "cmd": cmd, **payload}, ensure_ascii=False) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except OSError as exc:
            raise GatewayError(f"connection lost during {cmd!r}: {exc}") from exc
        if not line:
            raise GatewayError(f"server closed the connection during {cmd!r}")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GatewayError(f"malformed response line for {cmd!r}: {line!r}") from exc
        if not isinstance(resp, dict) or resp.get("id") != rid:
            raise GatewayError(
                f"response id mismatch for {cmd!r}: sent {rid}, got {resp.get('id') if isinstance(resp, dict) else resp!r}"
            )
        if not resp.get("ok"):
            raise GatewayError(f"server refused {cmd!r}: {resp.get('error', 'no error given')}")
        return resp

    def close(self) -> None:
        for stream in (self._reader, self._writer, self._sock):
            try:
                stream.close()
            except OSError:
                pass


def _parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 < int(port) < 65536:
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host, int(port)


@dataclass
class ModelHandle:
    """Binding of a model direction to a backend, plus checkpoint state.

    A handle owns at most one server connection and is not safe to share
    across concurrent callers; distinct handles may operate in parallel.
    """

    direction: Direction
    backend: Backend
    endpoint: Optional[str] = None
    decode_limits: DecodeLimits = DecodeLimits()
    checkpoint_tag: Optional[str] = None
    rule_model: Optional[RuleModel] = None
    history: list = field(default_factory=list, repr=False, compare=False)
    _conn: Optional[_Connection] = field(default=None, init=False, repr=False, compare=False)
    _tags: set = field(default_factory=set, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.backend is Backend.EXTERNAL:
            if not self.endpoint:
                raise ValueError("external backend requires an endpoint")
            _parse_endpoint(self.endpoint)
        else:
            if self.rule_model is None:
                if self.direction is Direction.D2T:
                    self.rule_model = RuleBasedD2T()
                else:
                    raise ValueError(
                        "rule-based T2D needs a record catalog; build a RuleBasedT2D first"
                    )
            want = RuleBasedD2T if self.direction is Direction.D2T else RuleBasedT2D
            if not isinstance(self.rule_model, want):
                raise ValueError(
                    f"{self.direction.value} handle holds a {type(self.rule_model).__name__}"
                )

    def _connection(self) -> _Connection:
        if self._conn is None:
            self._conn = _Connection(self.endpoint)
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None


def rule_based_handle(direction: Direction, model: Optional[RuleModel] = None) -> ModelHandle:
    return ModelHandle(direction=direction, backend=Backend.RULE_BASED, rule_model=model)


def external_handle(
    direction: Direction, endpoint: str, decode_limits: DecodeLimits = DecodeLimits()
) -> ModelHandle:
    return ModelHandle(
        direction=direction,
        backend=Backend.EXTERNAL,
        endpoint=endpoint,
        decode_limits=decode_limits,
    )


def generate_batch(h: ModelHandle, inputs: Sequence[str]) -> list[str]:
    """One output per input, order preserved, for either backend."""
    if not inputs:
        raise ValueError("generate_batch needs a non-empty input batch")
    if h.backend is Backend.RULE_BASED:
        return [h.rule_model.generate(t) for t in inputs]
    resp = h._connection().request(
        "generate",
        inputs=list(inputs),
        max_len=h.decode_limits.max_len,
        min_len=h.decode_limits.min_len,
    )
    outputs = resp.get("outputs")
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise GatewayError(f"generate response lacks a string 'outputs' list: {resp!r}")
    if len(outputs) != len(inputs):
        raise GatewayError(
            f"generate batch of {len(inputs)} got {len(outputs)} outputs "
            f"({h.direction.value} at {h.endpoint})"
        )
    return outputs


def train_batch(h: ModelHandle, pairs: Sequence[tuple[str, str]]) -> TrainAck:
    """Submit training pairs; rule-based backends record a no-op."""
    if not pairs:
        raise ValueError("train_batch needs a non-empty pair batch")
    if h.backend is Backend.RULE_BASED:
        h.history.append(("train", len(pairs)))
        return TrainAck(loss=None)
    resp = h._connection().request("train", pairs=[[s, t] for s, t in pairs])
    loss = resp.get("loss")
    if loss is not None and not isinstance(loss, (int, float)):
        raise GatewayError(f"train response carries a non-numeric loss: {loss!r}")
    return TrainAck(loss=None if loss is None else float(loss))


def checkpoint(h: ModelHandle, action: CheckpointAction, tag: str) -> None:
    """Save or load a named checkpoint; success updates h.checkpoint_tag."""
    if not tag or not tag.strip():
        raise ValueError("checkpoint tag must be non-empty")
    if h.backend is Backend.RULE_BASED:
        if action is CheckpointAction.SAVE:
            h._tags.add(tag)
        elif tag not in h._tags:
            raise GatewayError(f"unknown checkpoint tag {tag!r}")
        h.history.append((action.value, tag))
    else:
        h._connection().request(action.value, tag=tag)
    h.checkpoint_tag = tag


def shutdown_server(h: ModelHandle) -> None:
    """Ask an external server to stop; no-op for rule-based handles."""
    if h.backend is Backend.EXTERNAL and h._conn is not None:
        try:
            h._conn.request("shutdown")
        finally:
            h.close()
