"""Hierarchical transmission planning over a serial bandwidth/latency link.

Arrival times are accumulated as exact fractions and rounded to float once
per value, so permuting a payload set never changes the total duration.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import List, NamedTuple, Sequence

KIND_RANK = {k: i for i, k in enumerate(
    ("caption", "cutout", "ae_embedding", "lossy_image", "lossless_image", "raw_image"))}
INTELLIGENCE_KINDS = frozenset({"caption", "cutout", "ae_embedding", "lossy_image"})

TIMELINE_HEADER = ("index", "kind", "byte_size", "start_s", "arrival_s", "cumulative_bytes")
POLICY_HEADER = ("policy", "time_to_first_intelligence_s", "total_duration_s")


class SizedItem(NamedTuple):
    """Stand-in for a payload when only kind and size are known."""
    kind: str
    byte_size: int


@dataclass(frozen=True)
class LinkModel:
    bandwidth: float  # bytes per second
    per_message_latency: float = 0.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.per_message_latency < 0:
            raise ValueError("latency must be >= 0")


@dataclass(frozen=True)
class TransmissionPlan:
    payloads: tuple
    policy: str = "given"

    def __len__(self):
        return len(self.payloads)


@dataclass(frozen=True)
class Arrival:
    index: int
    kind: str
    byte_size: int
    start: float
    arrival: float
    cumulative_bytes: int


@dataclass(frozen=True)
class DeliveryTimeline:
    entries: tuple
    total_duration: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TIMELINE_HEADER)
        for e in self.entries:
            w.writerow([e.index, e.kind, e.byte_size, repr(e.start), repr(e.arrival),
                        e.cumulative_bytes])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DeliveryTimeline":
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != TIMELINE_HEADER:
            raise ValueError(f"unexpected timeline header {rows[0]}")
        entries = tuple(Arrival(int(r[0]), r[1], int(r[2]), float(r[3]), float(r[4]), int(r[5]))
                        for r in rows[1:] if r)
        return cls(entries, entries[-1].arrival if entries else 0.0)


def _check_kind(kind: str) -> None:
    if kind not in KIND_RANK:
        raise ValueError(f"unknown payload kind {kind!r}")


def plan_as_given(payloads: Sequence) -> TransmissionPlan:
    if not payloads:
        raise ValueError("nothing to transmit")
    return TransmissionPlan(tuple(payloads), "unordered")


def plan_hierarchical(payloads: Sequence) -> TransmissionPlan:
    """Smallest first; ties by kind rank, then by input position."""
    if not payloads:
        raise ValueError("nothing to transmit")
    for p in payloads:
        _check_kind(p.kind)
    order = sorted(range(len(payloads)),
                   key=lambda i: (payloads[i].byte_size, KIND_RANK[payloads[i].kind], i))
    return TransmissionPlan(tuple(payloads[i] for i in order), "hierarchical")


def plan_raw_first(payloads: Sequence) -> TransmissionPlan:
    """Raw images first, everything else in the order given."""
    if not payloads:
        raise ValueError("nothing to transmit")
    raw = [p for p in payloads if p.kind == "raw_image"]
    rest = [p for p in payloads if p.kind != "raw_image"]
    return TransmissionPlan(tuple(raw + rest), "raw_first")


def simulate(plan, link: LinkModel) -> DeliveryTimeline:
    payloads = plan.payloads if isinstance(plan, TransmissionPlan) else tuple(plan)
    bw = Fraction(link.bandwidth)
    lat = Fraction(link.per_message_latency)
    t = Fraction(0)
    cum = 0
    entries = []
    for i, p in enumerate(payloads):
        start = t
        t = start + lat + Fraction(p.byte_size) / bw
        cum += p.byte_size
        entries.append(Arrival(i, p.kind, p.byte_size, float(start), float(t), cum))
    return DeliveryTimeline(tuple(entries), float(t))


def time_to_first_intelligence(timeline: DeliveryTimeline, plan=None) -> float:
    kinds = ([p.kind for p in plan.payloads] if isinstance(plan, TransmissionPlan)
             else [e.kind for e in timeline.entries])
    for kind, entry in zip(kinds, timeline.entries):
        if kind in INTELLIGENCE_KINDS:
            return entry.arrival
    raise ValueError("no intelligence payload")


@dataclass(frozen=True)
class PolicyResult:
    policy: str
    time_to_first_intelligence: float | None
    total_duration: float


def compare_policies(payloads: Sequence, link: LinkModel) -> List[PolicyResult]:
    results = []
    for planner in (plan_hierarchical, plan_raw_first, plan_as_given):
        plan = planner(payloads)
        timeline = simulate(plan, link)
        try:
            ttfi = time_to_first_intelligence(timeline, plan)
        except ValueError:
            ttfi = None
        results.append(PolicyResult(plan.policy, ttfi, timeline.total_duration))
    return results


def policies_to_csv(results: Sequence[PolicyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POLICY_HEADER)
    for r in results:
        ttfi = "" if r.time_to_first_intelligence is None else repr(r.time_to_first_intelligence)
        w.writerow([r.policy, ttfi, repr(r.total_duration)])
    return buf.getvalue()


def policies_from_csv(text: str) -> List[PolicyResult]:
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != POLICY_HEADER:
        raise ValueError(f"unexpected policy header {rows[0]}")
    return [PolicyResult(r[0], float(r[1]) if r[1] else None, float(r[2]))
            for r in rows[1:] if r]
