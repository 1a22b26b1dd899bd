"""Ideal broadcast channel: zero delay, no loss, deterministic ordering."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

MESSAGE_COLUMNS = ("t", "sender", "recipients", "z_re", "z_im", "theta", "u")


@dataclass(frozen=True)
class Message:
    sender: int
    t: float
    z: complex
    theta: float
    u: float
    recipients: tuple = ()


@dataclass
class NetworkStats:
    trigger_counts: dict
    intervals: dict
    message_count: int
    min_interval: float | None

    @property
    def total_triggers(self) -> int:
        return sum(self.trigger_counts.values())

    def min_interval_of(self, k: int) -> float | None:
        iv = self.intervals.get(k, [])
        return min(iv) if iv else None


class MessageLog:
    """Append-only message log with incrementally maintained counters."""

    def __init__(self, n_robots: int = 0):
        self.n_robots = n_robots
        self.entries: list[Message] = []
        self._counts = defaultdict(int)
        self._last_t: dict[int, float] = {}
        self._intervals = defaultdict(list)
        self._deliveries = 0
        for k in range(n_robots):
            self._counts[k] = 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, msg: Message) -> None:
        if self.entries:
            last = self.entries[-1]
            if msg.t < last.t or (msg.t == last.t and msg.sender <= last.sender):
                raise ValueError("messages must be logged in (time, sender) order")
        self.entries.append(msg)
        k = msg.sender
        self._counts[k] += 1
        if k in self._last_t:
            self._intervals[k].append(msg.t - self._last_t[k])
        self._last_t[k] = msg.t
        self._deliveries += len(msg.recipients)

    def incremental_stats(self) -> NetworkStats:
        ivs = {k: list(v) for k, v in self._intervals.items()}
        flat = [x for v in ivs.values() for x in v]
        return NetworkStats(dict(self._counts), ivs, self._deliveries, min(flat) if flat else None)


def broadcast(msg: Message, log: MessageLog) -> tuple:
    """Log ``msg`` and return its delivery set in ascending robot order."""
    msg = msg if msg.recipients == tuple(sorted(msg.recipients)) else \
        Message(msg.sender, msg.t, msg.z, msg.theta, msg.u, tuple(sorted(msg.recipients)))
    log.append(msg)
    return msg.recipients


def stats(log, horizon: float | None = None, n_robots: int | None = None) -> NetworkStats:
    """Recount everything from the log entries (optionally only ``t <= horizon``)."""
    if n_robots is None:
        n_robots = getattr(log, "n_robots", 0)
    counts = {k: 0 for k in range(n_robots)}
    times = defaultdict(list)
    deliveries = 0
    for m in log:
        if horizon is not None and m.t > horizon:
            continue
        counts[m.sender] = counts.get(m.sender, 0) + 1
        times[m.sender].append(m.t)
        deliveries += len(m.recipients)
    ivs = {k: [b - a for a, b in zip(ts, ts[1:])] for k, ts in times.items() if len(ts) > 1}
    flat = [x for v in ivs.values() for x in v]
    return NetworkStats(counts, ivs, deliveries, min(flat) if flat else None)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_messages_csv(log, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MESSAGE_COLUMNS)
    for m in log:
        w.writerow([_fmt(m.t), m.sender, " ".join(str(r) for r in m.recipients),
                    _fmt(m.z.real), _fmt(m.z.imag), _fmt(m.theta), _fmt(m.u)])


def messages_to_csv(log) -> str:
    buf = io.StringIO()
    write_messages_csv(log, buf)
    return buf.getvalue()


def read_messages_csv(fh) -> list[Message]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != MESSAGE_COLUMNS:
        raise ValueError(f"unexpected message columns {reader.fieldnames}")
    out = []
    for row in reader:
        rec = tuple(int(r) for r in row["recipients"].split())
        out.append(Message(int(row["sender"]), float(row["t"]),
                           complex(float(row["z_re"]), float(row["z_im"])),
                           float(row["theta"]), float(row["u"]), rec))
    return out
