import random

import pytest

from cfsmkit import (
    Action,
    Cfsm,
    Channel,
    CommunicatingSystem,
    Configuration,
    InvalidSystemError,
    Message,
    Role,
    StateKind,
    SystemMismatchError,
    classify_state,
    enabled_actions,
    explore,
    initial_configuration,
    parse_system,
    semantics,
    serialize_system,
    step,
)
from cfsmkit.system import render_trace
from generators import random_machine


def handoff_system():
    a = Cfsm.make("A", "q0", [("q0", Action.send("A", "B", "a"), "q1")])
    b = Cfsm.make("B", "r0", [("r0", Action.receive("A", "B", "a"), "r1")])
    return CommunicatingSystem({"A": a, "B": b})


def pump_system():
    a = Cfsm.make("A", "q0", [("q0", Action.send("A", "B", "a"), "q0")])
    b = Cfsm.make("B", "r0")
    return CommunicatingSystem({"A": a, "B": b})


def cfg(control, buffers=None):
    return Configuration.make(control, buffers or {})


AB = Channel(Role("A"), Role("B"))


# -- construction -------------------------------------------------------------

def test_machine_key_must_match_subject(mj):
    with pytest.raises(InvalidSystemError):
        CommunicatingSystem({"X": mj})


def test_channels_must_stay_inside_the_system(mj):
    # J's machine talks to M, so a system without M is rejected.
    with pytest.raises(InvalidSystemError):
        CommunicatingSystem({"J": mj})


def test_initial_configuration_examples(relay_expr):
    s = handoff_system()
    assert initial_configuration(s) == cfg({"A": "q0", "B": "r0"})

    solo = CommunicatingSystem({"A": Cfsm.make("A", "q7")})
    assert initial_configuration(solo) == cfg({"A": "q7"})

    composed = semantics(relay_expr)
    init = initial_configuration(composed)
    assert init.buffers == ()
    for role in composed.roles:
        assert init.state_of(role) == composed[role].initial


# -- step ---------------------------------------------------------------------

def test_step_send_appends_and_moves_only_the_sender():
    s = handoff_system()
    init = initial_configuration(s)
    succ = step(s, init, Action.send("A", "B", "a"))
    assert succ == frozenset({cfg({"A": "q1", "B": "r0"}, {AB: ["a"]})})


def test_step_receive_pops_the_head():
    s = handoff_system()
    mid = cfg({"A": "q1", "B": "r0"}, {AB: ["a"]})
    succ = step(s, mid, Action.receive("A", "B", "a"))
    assert succ == frozenset({cfg({"A": "q1", "B": "r1"})})


def test_step_receive_on_empty_buffer_is_not_enabled():
    s = handoff_system()
    assert step(s, initial_configuration(s), Action.receive("A", "B", "a")) == frozenset()


def test_step_send_without_matching_transition_is_not_enabled():
    s = handoff_system()
    assert step(s, initial_configuration(s), Action.send("A", "B", "zzz")) == frozenset()


def test_step_rejects_foreign_configurations():
    s = handoff_system()
    with pytest.raises(SystemMismatchError):
        step(s, cfg({"A": "q0"}), Action.send("A", "B", "a"))
    with pytest.raises(SystemMismatchError):
        step(s, cfg({"A": "nope", "B": "r0"}), Action.send("A", "B", "a"))


def test_step_returns_all_targets_of_a_nondeterministic_send():
    a = Cfsm.make("A", "q0", [
        ("q0", Action.send("A", "B", "a"), "q1"),
        ("q0", Action.send("A", "B", "a"), "q2"),
    ])
    b = Cfsm.make("B", "r0")
    s = CommunicatingSystem({"A": a, "B": b})
    succ = step(s, initial_configuration(s), Action.send("A", "B", "a"))
    assert len(succ) == 2


# -- enabled actions ----------------------------------------------------------

def test_enabled_actions_examples(relay_expr):
    s = handoff_system()
    assert enabled_actions(s, initial_configuration(s)) == frozenset({Action.send("A", "B", "a")})

    # Mutual wait: nothing is enabled.
    a = Cfsm.make("A", "q0", [("q0", Action.receive("B", "A", "x"), "q1")])
    b = Cfsm.make("B", "r0", [("r0", Action.receive("A", "B", "y"), "r1")])
    stuck = CommunicatingSystem({"A": a, "B": b})
    assert enabled_actions(stuck, initial_configuration(stuck)) == frozenset()

    # In the composed example, only machines whose initial state sends may move.
    composed = semantics(relay_expr)
    init = initial_configuration(composed)
    expected = set()
    for role in composed.roles:
        m = composed[role]
        if classify_state(m, m.initial) is StateKind.SENDING:
            expected |= {t[1] for t in m.outgoing(m.initial)}
    enabled = enabled_actions(composed, init)
    assert enabled == frozenset(expected)
    assert enabled == frozenset({
        Action.send("I", "C", "trialsNum"),
        Action.send("A", "K", "text"),
        Action.send("B", "K", "text"),
    })


def test_enabled_actions_match_step():
    s = handoff_system()
    mid = cfg({"A": "q1", "B": "r0"}, {AB: ["a"]})
    for c in (initial_configuration(s), mid):
        enabled = enabled_actions(s, c)
        for act in enabled:
            assert step(s, c, act)


# -- exploration --------------------------------------------------------------

def test_explore_handoff_exactly_three_configurations():
    s = handoff_system()
    result = explore(s, max_buffer_bound=1)
    expected = {
        cfg({"A": "q0", "B": "r0"}),
        cfg({"A": "q1", "B": "r0"}, {AB: ["a"]}),
        cfg({"A": "q1", "B": "r1"}),
    }
    assert result.reachable == frozenset(expected)
    assert not result.frontier_truncated
    assert not result.state_budget_exhausted
    assert len(result.transition_edges) == 2


def test_explore_transitionless_machines_single_configuration():
    s = CommunicatingSystem({"A": Cfsm.make("A", "q0"), "B": Cfsm.make("B", "r0")})
    result = explore(s)
    assert len(result.reachable) == 1


def test_explore_truncates_at_the_buffer_bound():
    result = explore(pump_system(), max_buffer_bound=3)
    assert result.frontier_truncated
    assert len(result.reachable) == 4  # buffer lengths 0..3
    assert max(len(c.buffer(AB)) for c in result.reachable) == 3


def test_explore_reports_state_budget_exhaustion():
    result = explore(pump_system(), max_buffer_bound=100, max_states=5)
    assert result.state_budget_exhausted
    assert len(result.reachable) == 5


def test_explore_bounds_must_be_positive():
    with pytest.raises(ValueError):
        explore(handoff_system(), max_buffer_bound=0)


def test_reachable_monotone_in_the_bound():
    rng = random.Random(5)
    for _ in range(25):
        machines = {}
        for name, partner in (("A", "B"), ("B", "A")):
            machines[name] = random_machine(rng, subject=name, partners=(partner,),
                                            max_states=3, max_transitions=4)
        s = CommunicatingSystem(machines)
        prev = None
        for bound in (1, 2, 3):
            result = explore(s, max_buffer_bound=bound, max_states=50_000)
            if prev is not None:
                assert prev.reachable <= result.reachable
                if not prev.frontier_truncated:
                    assert prev.reachable == result.reachable
            prev = result


def test_edges_change_one_buffer_and_one_machine():
    result = explore(pump_system(), max_buffer_bound=2)
    moved_any = False
    for src, act, dst in result.transition_edges:
        changed_roles = [r for r, q in src.control if dst.state_of(r) != q]
        assert changed_roles in ([], [act.subject])  # self-loops keep the state
        moved_any = moved_any or bool(changed_roles)
        src_bufs = dict(src.buffers)
        dst_bufs = dict(dst.buffers)
        touched = {ch for ch in set(src_bufs) | set(dst_bufs)
                   if src_bufs.get(ch, ()) != dst_bufs.get(ch, ())}
        assert touched == {act.channel}
        if act.direction.value == "!":
            assert dst.buffer(act.channel) == src.buffer(act.channel) + (act.message,)
        else:
            assert src.buffer(act.channel)[0] == act.message
            assert dst.buffer(act.channel) == src.buffer(act.channel)[1:]


def test_edge_targets_agree_with_step():
    s = handoff_system()
    result = explore(s, max_buffer_bound=2)
    for src, act, dst in result.transition_edges:
        assert dst in step(s, src, act)


def test_trace_to_replays_to_the_target():
    s = handoff_system()
    result = explore(s, max_buffer_bound=1)
    target = cfg({"A": "q1", "B": "r1"})
    trace = result.trace_to(target)
    assert trace == (Action.send("A", "B", "a"), Action.receive("A", "B", "a"))


def test_step_in_the_composed_example(relay_expr):
    # At the initial configuration, the screener gateway cannot yet receive
    # A's text (its buffer is empty); A's send deposits it.
    s = semantics(relay_expr)
    init = initial_configuration(s)
    assert step(s, init, Action.receive("A", "K", "text")) == frozenset()
    (after,) = step(s, init, Action.send("A", "K", "text"))
    assert after.buffer(Channel(Role("A"), Role("K"))) == (Message("text"),)
    assert after.state_of("A") != init.state_of("A")
    for role in s.roles:
        if role != Role("A"):
            assert after.state_of(role) == init.state_of(role)


def test_composed_edges_replay_through_step(relay_expr):
    s = semantics(relay_expr)
    result = explore(s, max_buffer_bound=1)
    sample = sorted(result.transition_edges,
                    key=lambda e: (e[0].control, e[0].buffers, e[1]))[::7][:150]
    for src, act, dst in sample:
        assert dst in step(s, src, act)


def test_every_reachable_configuration_is_connected(relay_expr):
    s = semantics(relay_expr)
    result = explore(s, max_buffer_bound=1)
    for cfg in result.reachable:
        trace = result.trace_to(cfg)  # raises if disconnected
        assert len(trace) >= 0


def test_parallel_exploration_is_identical(relay_expr):
    s = semantics(relay_expr)
    seq = explore(s, max_buffer_bound=2)
    par = explore(s, max_buffer_bound=2, jobs=3)
    assert seq.reachable == par.reachable
    assert seq.discovery_order == par.discovery_order
    assert seq.transition_edges == par.transition_edges


# -- serialization and traces -------------------------------------------------

def test_system_round_trip(relay_expr):
    # The file format carries no alphabet field (a parsed machine's message
    # set is derived from its transitions), so round-tripping is bit-exact on
    # the text and exact on everything but unused alphabet entries.
    s = semantics(relay_expr)
    text = serialize_system(s)
    again = parse_system(text)
    assert serialize_system(again) == text
    assert set(again.roles) == set(s.roles)
    for role in s.roles:
        assert again[role].states == s[role].states
        assert again[role].initial == s[role].initial
        assert again[role].transitions == s[role].transitions


def test_render_trace_lines():
    s = handoff_system()
    text = render_trace(s, [Action.send("A", "B", "a"), Action.receive("A", "B", "a")])
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("init ")
    assert lines[1].startswith("1. AB!a ")
    assert lines[2].startswith("2. AB?a ")
