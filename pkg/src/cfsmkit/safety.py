"""Safety properties of communicating systems.

Three kinds of bad configuration are detected:

* deadlock: every buffer is empty but every machine sits in a receiving
  state, so nobody will ever move;
* orphan message: every machine is final yet some buffer still holds a
  message that will never be consumed;
* unspecified reception: some machine is in a receiving state and every
  channel it could consume from has a nonempty buffer whose head message it
  cannot receive there.

``check_safety`` explores the reachable configurations within bounds and
reports, per property, either a violation with the breadth-first witness
trace, or that the system is safe within the explored bound, or safe
outright when the exploration was exhaustive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .cfsm import Action, Direction, StateKind, classify_state
from .system import (
    CommunicatingSystem,
    Configuration,
    ExplorationResult,
    explore,
)


class VerdictStatus(Enum):
    VIOLATION = "violation"
    SAFE_WITHIN_BOUND = "safe-within-bound"
    SAFE_COMPLETE = "safe-complete"


@dataclass(frozen=True)
class PropertyVerdict:
    status: VerdictStatus
    witness: Optional[tuple[Action, ...]] = None
    witness_configuration: Optional[Configuration] = None
    witness_digests: Optional[tuple[str, ...]] = None

    @property
    def violated(self) -> bool:
        return self.status is VerdictStatus.VIOLATION


@dataclass(frozen=True)
class ExplorationStats:
    configurations: int
    edges: int
    max_buffer_bound: int
    frontier_truncated: bool
    state_budget_exhausted: bool


@dataclass(frozen=True)
class SafetyReport:
    deadlock: PropertyVerdict
    orphan_message: PropertyVerdict
    unspecified_reception: PropertyVerdict
    stats: ExplorationStats

    def verdicts(self) -> dict[str, PropertyVerdict]:
        return {
            "deadlock": self.deadlock,
            "orphan-message": self.orphan_message,
            "unspecified-reception": self.unspecified_reception,
        }

    @property
    def has_violation(self) -> bool:
        return any(v.violated for v in self.verdicts().values())

    @property
    def conclusive(self) -> bool:
        return all(v.status is VerdictStatus.SAFE_COMPLETE for v in self.verdicts().values())


def is_deadlock(s: CommunicatingSystem, c: Configuration) -> bool:
    """All buffers empty and every machine in a receiving state."""
    if c.buffers:
        return False
    return all(
        classify_state(s[role], state) is StateKind.RECEIVING
        for role, state in c.control
    )


def is_orphan_message(s: CommunicatingSystem, c: Configuration) -> bool:
    """Every machine final, yet some buffer nonempty."""
    if not c.buffers:
        return False
    return all(
        classify_state(s[role], state) is StateKind.FINAL
        for role, state in c.control
    )


def is_unspecified_reception(s: CommunicatingSystem, c: Configuration) -> bool:
    """Some receiving machine finds, on every channel it could consume from,
    a nonempty buffer whose head it cannot receive in its current state."""
    for role, state in c.control:
        machine = s[role]
        if classify_state(machine, state) is not StateKind.RECEIVING:
            continue
        receivable: dict = {}
        for _, act, _ in machine.outgoing(state):
            if act.direction is Direction.RECEIVE:
                receivable.setdefault(act.channel, set()).add(act.message)
        blocked = True
        for channel, messages in receivable.items():
            buf = c.buffer(channel)
            if not buf or buf[0] in messages:
                blocked = False
                break
        if blocked and receivable:
            return True
    return False


def _scan_tables(s: CommunicatingSystem):
    # Control vectors follow the sorted role order, so index-aligned tables
    # of state kinds and receivable message sets make the scan cheap.
    kinds = []
    receivable = []
    for role in s.roles:
        machine = s[role]
        kinds.append({q: classify_state(machine, q) for q in machine.states})
        per_state: dict[str, dict] = {}
        for q in machine.states:
            chans: dict = {}
            for _, act, _ in machine.outgoing(q):
                if act.direction is Direction.RECEIVE:
                    chans.setdefault(act.channel, set()).add(act.message)
            per_state[q] = chans
        receivable.append(per_state)
    return kinds, receivable


def report_from_exploration(s: CommunicatingSystem, result: ExplorationResult) -> SafetyReport:
    """Evaluate the three predicates over an exploration, in discovery order."""
    safe_status = (VerdictStatus.SAFE_COMPLETE if result.complete
                   else VerdictStatus.SAFE_WITHIN_BOUND)
    kinds, receivable = _scan_tables(s)
    receiving = StateKind.RECEIVING
    final = StateKind.FINAL

    def scan_deadlock(cfg: Configuration) -> bool:
        return not cfg.buffers and all(
            kinds[i][state] is receiving for i, (_, state) in enumerate(cfg.control))

    def scan_orphan(cfg: Configuration) -> bool:
        return bool(cfg.buffers) and all(
            kinds[i][state] is final for i, (_, state) in enumerate(cfg.control))

    def scan_unspecified(cfg: Configuration) -> bool:
        bufmap = None
        for i, (_, state) in enumerate(cfg.control):
            if kinds[i][state] is not receiving:
                continue
            if bufmap is None:
                bufmap = dict(cfg.buffers)
            blocked = True
            for channel, msgs in receivable[i][state].items():
                buf = bufmap.get(channel)
                if not buf or buf[0] in msgs:
                    blocked = False
                    break
            if blocked:
                return True
        return False

    scanners = {
        "deadlock": scan_deadlock,
        "orphan_message": scan_orphan,
        "unspecified_reception": scan_unspecified,
    }
    verdicts: dict[str, PropertyVerdict] = {}
    pending = dict(scanners)
    for cfg in result.discovery_order:
        if not pending:
            break
        for name in list(pending):
            if pending[name](cfg):
                trace = result.trace_to(cfg)
                digests = _trace_digests(result, cfg)
                verdicts[name] = PropertyVerdict(
                    VerdictStatus.VIOLATION,
                    witness=trace,
                    witness_configuration=cfg,
                    witness_digests=digests,
                )
                del pending[name]
    for name in pending:
        verdicts[name] = PropertyVerdict(safe_status)
    stats = ExplorationStats(
        configurations=len(result.reachable),
        edges=len(result.transition_edges),
        max_buffer_bound=result.max_buffer_bound,
        frontier_truncated=result.frontier_truncated,
        state_budget_exhausted=result.state_budget_exhausted,
    )
    return SafetyReport(
        deadlock=verdicts["deadlock"],
        orphan_message=verdicts["orphan_message"],
        unspecified_reception=verdicts["unspecified_reception"],
        stats=stats,
    )


def _trace_digests(result: ExplorationResult, target: Configuration) -> tuple[str, ...]:
    # Digest after each step of the breadth-first parent path to target.
    chain: list[Configuration] = []
    cfg = target
    while True:
        parent = result._parents[cfg]
        if parent is None:
            break
        chain.append(cfg)
        cfg = parent[0]
    return tuple(c.digest() for c in reversed(chain))


def check_safety(s: CommunicatingSystem, max_buffer_bound: int = 4,
                 max_states: int = 1_000_000, jobs: int = 1) -> SafetyReport:
    """Explore within bounds and evaluate all three safety properties."""
    result = explore(s, max_buffer_bound=max_buffer_bound, max_states=max_states, jobs=jobs)
    return report_from_exploration(s, result)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _status_line(name: str, v: PropertyVerdict, bound: int) -> str:
    if v.status is VerdictStatus.VIOLATION:
        return f"{name}: VIOLATION"
    if v.status is VerdictStatus.SAFE_WITHIN_BOUND:
        return f"{name}: no violation within buffer bound {bound} (inconclusive)"
    return f"{name}: safe (exploration exhaustive)"


def render_report(report: SafetyReport) -> str:
    lines = []
    for name, verdict in report.verdicts().items():
        lines.append(_status_line(name, verdict, report.stats.max_buffer_bound))
        if verdict.violated and verdict.witness is not None:
            if verdict.witness:
                digests = verdict.witness_digests or ("",) * len(verdict.witness)
                for i, (act, digest) in enumerate(zip(verdict.witness, digests), start=1):
                    lines.append(f"  {i}. {act} {digest}")
            else:
                lines.append("  (violated at the initial configuration)")
            lines.append(f"  at {verdict.witness_configuration}")
    lines.append(
        f"explored {report.stats.configurations} configurations, "
        f"{report.stats.edges} edges, buffer bound {report.stats.max_buffer_bound}"
        + (", frontier truncated" if report.stats.frontier_truncated else "")
        + (", state budget exhausted" if report.stats.state_budget_exhausted else "")
    )
    return "\n".join(lines) + "\n"


def report_to_doc(report: SafetyReport) -> dict:
    """Machine-readable report document (schema versioned)."""
    def verdict_doc(v: PropertyVerdict) -> dict:
        doc: dict = {"status": v.status.value}
        if v.witness is not None:
            doc["witness"] = [str(a) for a in v.witness]
            doc["witness_digests"] = list(v.witness_digests or ())
            doc["witness_configuration"] = str(v.witness_configuration)
        return doc

    return {
        "schema": "cfsmkit.safety-report/1",
        "verdicts": {name: verdict_doc(v) for name, v in report.verdicts().items()},
        "stats": {
            "configurations": report.stats.configurations,
            "edges": report.stats.edges,
            "max_buffer_bound": report.stats.max_buffer_bound,
            "frontier_truncated": report.stats.frontier_truncated,
            "state_budget_exhausted": report.stats.state_budget_exhausted,
        },
    }
