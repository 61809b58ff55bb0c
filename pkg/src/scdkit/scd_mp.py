"""SCD-broadcast for asynchronous message passing with a minority of crashes.

Each process keeps a buffer of application messages it has heard of but not
yet delivered.  A buffer entry records, per process f, the sequence number
that f's own counter had when f forwarded the message (INFINITE while no
forward from f has been seen).  A message becomes deliverable once a strict
majority has forwarded it; the candidate set is then purged to a fixpoint,
dropping any candidate that is not known to precede some still-buffered
message at a majority of forwarders.  Whatever survives is delivered as one
message set.

The processes only emit FORWARD messages.  A fifo_broadcast here is a request
to send the same FORWARD to every process (self included; the receipt guard
absorbs the self copy), so one scd-broadcast costs at most n*n point-to-point
sends overall.  Completion of an scd-broadcast is a predicate, re-checked
after every event: no buffer entry of the caller's own message remains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import AppMessage, MsgId, UsageError

INFINITE = math.inf


@dataclass(frozen=True)
class ForwardMsg:
    """FORWARD(m, sd, sn_sd, f, sn_f): message m, first broadcast by sd with
    sequence number sn_sd, forwarded by f whose counter read sn_f."""

    m: AppMessage
    sd: int
    sn_sd: int
    f: int
    sn_f: int


@dataclass
class BufferEntry:
    m: AppMessage
    sd: int
    sn: int
    cl: list = field(default_factory=list)  # 1-based, entries int or INFINITE


def seen_first_count(entry: BufferEntry, other: BufferEntry, n: int) -> int:
    """How many processes forwarded `entry` before `other`."""
    return sum(1 for f in range(1, n + 1) if entry.cl[f] < other.cl[f])


def purge_blocked(candidates: list, buffer: list, n: int) -> list:
    """Shrink the candidate set to a fixpoint: drop any candidate that at most
    half the processes are known to have forwarded before some non-candidate.

    The result does not depend on examination order; dropping a candidate only
    grows the non-candidate side, which can only force further drops.
    """
    todeliver = list(candidates)
    changed = True
    while changed:
        changed = False
        outside = [e for e in buffer if all(e is not d for d in todeliver)]
        for e in list(todeliver):
            if any(2 * seen_first_count(e, other, n) <= n for other in outside):
                todeliver = [d for d in todeliver if d is not e]
                changed = True
                break
    return todeliver


class ScdProcess:
    """Per-process protocol state machine.

    Handlers mutate local state and return the FORWARD broadcasts to expand
    (one entry per fifo_broadcast, to be sent to all n processes) plus any
    delivered message sets; the transport lives elsewhere.
    """

    def __init__(self, pid: int, n: int):
        self.pid = pid
        self.n = n
        self.buffer: list[BufferEntry] = []
        self.sn = 0
        # clock[j] = greatest sn of a j-initiated message delivered here;
        # -1 while nothing from j was delivered (first messages carry sn 0).
        self.clock = [-1] * (n + 1)
        self.pending_broadcast: MsgId | None = None

    def scbroadcast(self, m: AppMessage) -> list[ForwardMsg]:
        if self.pending_broadcast is not None:
            raise UsageError(f"p{self.pid}: scbroadcast while one is pending")
        self.pending_broadcast = m.id
        out: list[ForwardMsg] = []
        self.forward(m, self.pid, self.sn, self.pid, self.sn, out)
        return out

    def on_forward(self, fmsg: ForwardMsg):
        """Receipt of a FORWARD: absorb it, then attempt delivery."""
        out: list[ForwardMsg] = []
        self.forward(fmsg.m, fmsg.sd, fmsg.sn_sd, fmsg.f, fmsg.sn_f, out)
        delivered = self.try_deliver()
        return out, ([delivered] if delivered is not None else [])

    def forward(self, m, sd, sn_sd, f, sn_f, out) -> None:
        if sn_sd <= self.clock[sd]:
            return  # already delivered here; stale copy
        entry = self._find(sd, sn_sd)
        if entry is not None:
            entry.cl[f] = sn_f
        else:
            cl = [INFINITE] * (self.n + 1)
            cl[f] = sn_f
            self.buffer.append(BufferEntry(m, sd, sn_sd, cl))
            out.append(ForwardMsg(m, sd, sn_sd, self.pid, self.sn))
            self.sn += 1

    def try_deliver(self):
        """Deliver one message set if possible, None otherwise."""
        candidates = [
            e
            for e in self.buffer
            if 2 * sum(1 for c in e.cl[1:] if c != INFINITE) > self.n
        ]
        todeliver = purge_blocked(candidates, self.buffer, self.n)
        if not todeliver:
            return None
        for e in todeliver:
            # Delivered entries always outrun the clock: an entry exists only
            # while sn > clock[sd], and no later entry of sd can overtake it.
            assert self.clock[e.sd] < e.sn
            self.clock[e.sd] = e.sn
        self.buffer = [e for e in self.buffer if all(e is not d for d in todeliver)]
        return frozenset(e.m for e in todeliver)

    def broadcast_complete(self) -> MsgId | None:
        """Report (and clear) a completed pending scd-broadcast, if any."""
        if self.pending_broadcast is None:
            return None
        if any(e.sd == self.pid for e in self.buffer):
            return None
        done = self.pending_broadcast
        self.pending_broadcast = None
        return done

    def _find(self, sd: int, sn: int):
        for e in self.buffer:
            if e.sd == sd and e.sn == sn:
                return e
        return None
