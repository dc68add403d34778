import random
from dataclasses import replace

import pytest

from cfsmkit import (
    Action,
    Cfsm,
    Channel,
    CommunicatingSystem,
    CompositionError,
    Direction,
    ErasedSymbol,
    IncompatibleInterfacesError,
    LanguageMismatch,
    Message,
    MixedState,
    NotIoDeterministic,
    Role,
    StateKind,
    check_compatibility,
    check_safety,
    classify_state,
    compose,
    explore,
    inserted_states,
    is_isomorphic,
    roles as type_roles,
)
from generators import mirror_protocol, project_system, random_open_protocol


def minimal_left(mj):
    return CommunicatingSystem({"J": mj, "M": Cfsm.make("M", "m0")})


def minimal_right(mk):
    return CommunicatingSystem({
        "K": mk, "A": Cfsm.make("A", "a0"), "B": Cfsm.make("B", "b0"),
    })


# -- compatibility ------------------------------------------------------------

def test_fixture_interfaces_are_compatible(mj, mk):
    verdict = check_compatibility(mj, mk)
    assert verdict.compatible
    assert verdict.failures == ()


def test_machine_is_not_compatible_with_itself(mj):
    verdict = check_compatibility(mj, mj)
    assert not verdict.compatible
    kinds = {type(f) for f in verdict.failures}
    assert kinds == {LanguageMismatch}
    (mismatch,) = verdict.failures
    assert mismatch.separating_word == (
        ErasedSymbol(Direction.SEND, Message("text")),
    )


def test_mixed_state_failure_is_reported(mj, mk):
    spoiled = Cfsm.make("K", "1", set(mk.transitions) | {
        ("2", Action.receive("A", "K", "text"), "2"),
    }, extra_states=mk.states)
    verdict = check_compatibility(mj, spoiled)
    assert not verdict.compatible
    assert MixedState(Role("K"), "2") in verdict.failures


def test_nondeterministic_receive_failure_is_reported(mj, mk):
    spoiled = Cfsm.make("K", "1", set(mk.transitions) | {
        ("1", Action.receive("A", "K", "text"), "3"),
    }, extra_states=mk.states)
    verdict = check_compatibility(mj, spoiled)
    assert not verdict.compatible
    assert any(isinstance(f, NotIoDeterministic) and f.role == Role("K")
               for f in verdict.failures)


def test_verdict_flag_matches_the_failure_list(mj, mk):
    assert check_compatibility(mj, mk).failures == ()
    assert check_compatibility(mj, mj).failures != ()
    with pytest.raises(ValueError):
        from cfsmkit import CompatibilityVerdict
        CompatibilityVerdict(True, (MixedState(Role("K"), "1"),))


def test_all_failures_are_collected(mj):
    # A machine that fails every clause at once.
    mess = Cfsm.make("K", "1", [
        ("1", Action.receive("A", "K", "text"), "2"),
        ("1", Action.send("K", "A", "junk"), "1"),
        ("1", Action.receive("B", "K", "text"), "3"),
    ])
    verdict = check_compatibility(mj, mess)
    kinds = {type(f) for f in verdict.failures}
    assert kinds == {LanguageMismatch, MixedState, NotIoDeterministic}


# -- composition --------------------------------------------------------------

def test_compose_replaces_interfaces_with_gateways(mj, mk, fig_gw_j, fig_gw_k):
    composed = compose(minimal_left(mj), "J", minimal_right(mk), "K")
    assert set(composed.roles) == {Role(r) for r in "JMKAB"}
    assert is_isomorphic(composed["J"], fig_gw_j)
    assert is_isomorphic(composed["K"], fig_gw_k)
    # The gateway construction keeps the original initial states.
    assert composed["J"].initial == mj.initial
    assert composed["K"].initial == mk.initial


def test_compose_carries_other_machines_over(mj, mk):
    left = minimal_left(mj)
    right = minimal_right(mk)
    composed = compose(left, "J", right, "K")
    union = frozenset()
    for s in (left, right):
        for r in s.roles:
            union |= s[r].messages
    for r in ("M", "A", "B"):
        source = left if r == "M" else right
        assert composed[r] == replace(source[r], messages=union)


def test_compose_requires_disjoint_roles(mj, mk):
    right = CommunicatingSystem({
        "K": mk, "A": Cfsm.make("A", "a0"), "B": Cfsm.make("B", "b0"),
        "M": Cfsm.make("M", "m0"),
    })
    with pytest.raises(CompositionError):
        compose(minimal_left(mj), "J", right, "K")


def test_compose_requires_member_roles(mj, mk):
    with pytest.raises(CompositionError):
        compose(minimal_left(mj), "X", minimal_right(mk), "K")
    with pytest.raises(CompositionError):
        compose(minimal_left(mj), "J", minimal_right(mk), "Y")


def test_compose_rejects_incompatible_interfaces(mj):
    left = minimal_left(mj)
    right = CommunicatingSystem({"K": Cfsm.make("K", "1"), "A": Cfsm.make("A", "a0")})
    with pytest.raises(IncompatibleInterfacesError) as err:
        compose(left, "J", right, "K")
    assert not err.value.verdict.compatible


def test_compose_two_empty_interfaces():
    left = CommunicatingSystem({"H": Cfsm.make("H", "h0")})
    right = CommunicatingSystem({"K": Cfsm.make("K", "k0")})
    composed = compose(left, "H", right, "K")
    assert set(composed.roles) == {Role("H"), Role("K")}
    assert composed["H"].transitions == frozenset()
    assert composed["K"].transitions == frozenset()


def test_composition_is_commutative(mj, mk):
    left = minimal_left(mj)
    right = minimal_right(mk)
    assert compose(left, "J", right, "K") == compose(right, "K", left, "J")


def chain_fixture():
    # Three tiny systems forming a chain: H1 <-> Ka and Kb <-> J3.
    left = CommunicatingSystem({
        "Y": Cfsm.make("Y", "0", [("0", Action.receive("H1", "Y", "a"), "1"),
                                  ("1", Action.send("Y", "H1", "b"), "2")]),
        "H1": Cfsm.make("H1", "0", [("0", Action.send("H1", "Y", "a"), "1"),
                                    ("1", Action.receive("Y", "H1", "b"), "2")]),
    })
    middle = CommunicatingSystem({
        "X": Cfsm.make("X", "0", [("0", Action.send("X", "Ka", "a"), "1"),
                                  ("1", Action.receive("Ka", "X", "b"), "2"),
                                  ("2", Action.send("X", "Kb", "c"), "3")]),
        "Ka": Cfsm.make("Ka", "0", [("0", Action.receive("X", "Ka", "a"), "1"),
                                    ("1", Action.send("Ka", "X", "b"), "2")]),
        "Kb": Cfsm.make("Kb", "0", [("0", Action.receive("X", "Kb", "c"), "1")]),
    })
    right = CommunicatingSystem({
        "Z": Cfsm.make("Z", "0", [("0", Action.receive("J3", "Z", "c"), "1")]),
        "J3": Cfsm.make("J3", "0", [("0", Action.send("J3", "Z", "c"), "1")]),
    })
    return left, middle, right


def test_composition_is_associative():
    left, middle, right = chain_fixture()
    one = compose(compose(left, "H1", middle, "Ka"), "Kb", right, "J3")
    two = compose(left, "H1", compose(middle, "Kb", right, "J3"), "Ka")
    assert one == two


def test_gateway_channels_quiesce_at_final_states():
    # Wherever both gateways sit in carried-over final states, the channels
    # between them are empty.
    left, middle, right = chain_fixture()
    composed = compose(left, "H1", middle, "Ka")
    h_ins = inserted_states(composed["H1"])
    k_ins = inserted_states(composed["Ka"])
    hk = Channel(Role("H1"), Role("Ka"))
    kh = Channel(Role("Ka"), Role("H1"))
    result = explore(composed, max_buffer_bound=4)
    assert not result.frontier_truncated
    checked = 0
    for cfg in result.discovery_order:
        qh = cfg.state_of("H1")
        qk = cfg.state_of("Ka")
        if qh in h_ins or qk in k_ins:
            continue
        if (classify_state(composed["H1"], qh) is StateKind.FINAL
                and classify_state(composed["Ka"], qk) is StateKind.FINAL):
            checked += 1
            assert cfg.buffer(hk) == ()
            assert cfg.buffer(kh) == ()
    assert checked > 0


def test_safety_preservation_small_batch():
    rng = random.Random(2024)
    done = 0
    while done < 10:
        g1 = random_open_protocol(rng)
        g2 = mirror_protocol(g1, "H", "E", "K")
        if Role("K") not in type_roles(g2):
            continue
        s1 = project_system(g1)
        s2 = project_system(g2)
        if not check_compatibility(s1[Role("H")], s2[Role("K")]).compatible:
            continue
        r1 = check_safety(s1, max_buffer_bound=4)
        r2 = check_safety(s2, max_buffer_bound=4)
        if not (r1.conclusive and r2.conclusive):
            continue
        composed = compose(s1, "H", s2, "K")
        report = check_safety(composed, max_buffer_bound=4)
        assert not report.has_violation
        done += 1
