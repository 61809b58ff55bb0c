"""Snapshot objects and read/write registers built on SCD-broadcast.

The multi-writer multi-reader snapshot object keeps, per process, an array of
register values with one timestamp each.  A snapshot performs one SYNC round
(broadcast an empty marker, wait until a set containing it is delivered) and
returns the local array.  A write performs a SYNC round, then broadcasts the
value tagged with (local date + 1, writer id) and waits for that WRITE to come
back.  Delivery of a message set installs, per register, the greatest-tagged
WRITE of the set if it beats the local tag; all WRITEs of a set are processed
before the own-origin test that terminates a pending round.

Variants:
  * MwmrRegister: the snapshot object restricted to a single register.
  * SwmrRegister: single writer, so version tags shrink to a bare date.
  * synchronized=False on any of them drops the SYNC rounds, trading
    linearizability for sequential consistency: reads return the local state
    immediately and cost no messages, writes cost one broadcast instead of two.

Objects never talk to a network directly.  Operations and delivery handlers
return an ObjStep holding at most one payload to scd-broadcast next and, when
a pending operation just completed, its result.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import INITIAL_TS, NONE_PROC, Timestamp, UsageError, ts_less


@dataclass(frozen=True)
class WritePayload:
    r: int
    value: bytes
    ts: Timestamp


@dataclass(frozen=True)
class SyncPayload:
    origin: int


def encode_payload(p) -> bytes:
    if isinstance(p, WritePayload):
        return f"W|{p.r}|{p.value.hex()}|{p.ts}".encode("ascii")
    if isinstance(p, SyncPayload):
        return f"S|{p.origin}".encode("ascii")
    raise UsageError(f"not an object payload: {p!r}")


def decode_payload(raw: bytes):
    text = raw.decode("ascii")
    tag, rest = text.split("|", 1)
    if tag == "W":
        r, value, ts = rest.split("|")
        return WritePayload(int(r), bytes.fromhex(value), Timestamp.parse(ts))
    if tag == "S":
        return SyncPayload(int(rest))
    raise UsageError(f"unknown payload tag: {text!r}")


@dataclass
class OpResult:
    kind: str                       # snapshot | read | write
    values: Optional[tuple] = None  # snapshot: full array; read: 1-tuple
    ts: Optional[Timestamp] = None  # write: tag used; read: tag of the value
    tsa: Optional[tuple] = None     # snapshot/read: tag array at return


@dataclass
class ObjStep:
    broadcast: Optional[bytes] = None
    result: Optional[OpResult] = None


INITIAL_VALUE = b""


class SnapshotObject:
    """Multi-writer multi-reader snapshot over an SCD-broadcast layer."""

    def __init__(self, pid: int, nregs: int, synchronized: bool = True):
        if nregs < 1:
            raise UsageError("need at least one register")
        self.pid = pid
        self.nregs = nregs
        self.synchronized = synchronized
        self.reg = [INITIAL_VALUE] * (nregs + 1)      # 1-based
        self.tsa = [INITIAL_TS] * (nregs + 1)
        self._pending = None

    # -- operations -------------------------------------------------------

    def begin_snapshot(self) -> ObjStep:
        self._require_idle()
        if not self.synchronized:
            return ObjStep(result=self._snapshot_result())
        self._pending = ("snapshot",)
        return ObjStep(broadcast=encode_payload(SyncPayload(self.pid)))

    def begin_write(self, r: int, value: bytes) -> ObjStep:
        self._require_idle()
        if not 1 <= r <= self.nregs:
            raise UsageError(f"register {r} out of range 1..{self.nregs}")
        if not self.synchronized:
            return self._cast_write(r, value)
        self._pending = ("write_sync", r, value)
        return ObjStep(broadcast=encode_payload(SyncPayload(self.pid)))

    # -- delivery ---------------------------------------------------------

    def on_set_delivered(self, ms) -> ObjStep:
        self._install_writes(ms)
        if self._pending is None or not any(m.id.sender == self.pid for m in ms):
            return ObjStep()
        pending, self._pending = self._pending, None
        if pending[0] == "snapshot":
            return ObjStep(result=self._snapshot_result())
        if pending[0] == "write_sync":
            _, r, value = pending
            return self._cast_write(r, value)
        _, r, value, ts = pending  # write_cast
        return ObjStep(result=OpResult("write", ts=ts))

    # -- internals --------------------------------------------------------

    def _install_writes(self, ms) -> None:
        per_reg: dict[int, WritePayload] = {}
        for m in ms:
            p = decode_payload(m.payload)
            if isinstance(p, WritePayload):
                best = per_reg.get(p.r)
                if best is None or ts_less(best.ts, p.ts):
                    per_reg[p.r] = p
        for r, w in per_reg.items():
            if ts_less(self.tsa[r], w.ts):
                self.reg[r] = w.value
                self.tsa[r] = w.ts

    def _cast_write(self, r, value) -> ObjStep:
        ts = Timestamp(self.tsa[r].date + 1, self.pid)
        self._pending = ("write_cast", r, value, ts)
        return ObjStep(broadcast=encode_payload(WritePayload(r, value, ts)))

    def _snapshot_result(self) -> OpResult:
        return OpResult("snapshot", values=tuple(self.reg[1:]), tsa=tuple(self.tsa[1:]))

    def _require_idle(self):
        if self._pending is not None:
            raise UsageError(f"p{self.pid}: operation already in progress")


class MwmrRegister:
    """Multi-writer register: the snapshot object with a single slot."""

    def __init__(self, pid: int, synchronized: bool = True):
        self._snap = SnapshotObject(pid, 1, synchronized)
        self.pid = pid

    def begin_read(self) -> ObjStep:
        return _as_read(self._snap.begin_snapshot())

    def begin_write(self, value: bytes) -> ObjStep:
        return self._snap.begin_write(1, value)

    def on_set_delivered(self, ms) -> ObjStep:
        return _as_read(self._snap.on_set_delivered(ms))


def _as_read(step: ObjStep) -> ObjStep:
    if step.result is not None and step.result.kind == "snapshot":
        res = step.result
        step = ObjStep(
            broadcast=step.broadcast,
            result=OpResult("read", values=res.values, ts=res.tsa[0], tsa=res.tsa),
        )
    return step


class SwmrRegister:
    """Single-writer register: version tags are bare dates.

    Only the designated writer may write; its delivered sets can contain at
    most one WRITE at a time, so delivery keeps the greatest date of the set
    with no further comparison against the local state.
    """

    def __init__(self, pid: int, writer: int, synchronized: bool = True):
        self.pid = pid
        self.writer = writer
        self.synchronized = synchronized
        self.reg = INITIAL_VALUE
        self.date = 0       # date of the value currently held
        self.wdate = 0      # writer only: last date handed out
        self._pending = None

    def begin_read(self) -> ObjStep:
        self._require_idle()
        if not self.synchronized:
            return ObjStep(result=self._read_result())
        self._pending = ("read",)
        return ObjStep(broadcast=encode_payload(SyncPayload(self.pid)))

    def begin_write(self, value: bytes) -> ObjStep:
        self._require_idle()
        if self.pid != self.writer:
            raise UsageError(f"p{self.pid} is not the writer (p{self.writer})")
        if not self.synchronized:
            return self._cast_write(value)
        self._pending = ("write_sync", value)
        return ObjStep(broadcast=encode_payload(SyncPayload(self.pid)))

    def on_set_delivered(self, ms) -> ObjStep:
        writes = [
            p
            for m in ms
            if isinstance(p := decode_payload(m.payload), WritePayload)
        ]
        if writes:
            best = max(writes, key=lambda w: w.ts.date)
            # A set can only bring dates at or past the current one: the
            # writer delivers its own writes in date order, and set order at
            # any process never contradicts the writer's strict order.
            assert best.ts.date >= self.date
            self.reg = best.value
            self.date = best.ts.date
        if self._pending is None or not any(m.id.sender == self.pid for m in ms):
            return ObjStep()
        pending, self._pending = self._pending, None
        if pending[0] == "read":
            return ObjStep(result=self._read_result())
        if pending[0] == "write_sync":
            return self._cast_write(pending[1])
        return ObjStep(result=OpResult("write", ts=Timestamp(pending[1], self.writer)))

    def _cast_write(self, value) -> ObjStep:
        self.wdate += 1
        self._pending = ("write_cast", self.wdate)
        payload = WritePayload(1, value, Timestamp(self.wdate, self.writer))
        return ObjStep(broadcast=encode_payload(payload))

    def _read_result(self) -> OpResult:
        ts = Timestamp(self.date, self.writer if self.date else NONE_PROC)
        return OpResult("read", values=(self.reg,), ts=ts, tsa=(ts,))

    def _require_idle(self):
        if self._pending is not None:
            raise UsageError(f"p{self.pid}: operation already in progress")
