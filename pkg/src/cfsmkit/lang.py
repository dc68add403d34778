"""Channel-erased languages, dualization, and language equivalence.

Interface compatibility compares the language of one machine with the dual of
another's after *erasing* channels: each action keeps only its direction and
message.  Since every state of a machine accepts, the erased languages are
prefix-closed, and a word belongs to the language exactly when some path from
the initial state spells it.

Equality of two erased languages is decided by determinizing both automata on
the fly (subset construction) and searching the product for a pair of subset
states where exactly one side can extend the word: because all states accept,
any discrepancy shows up as a symbol enabled on one side only.  The search is
breadth-first, so a reported separating word is shortest.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

from .cfsm import Cfsm, Direction, Message


@dataclass(frozen=True, slots=True, order=True)
class ErasedSymbol:
    """A direction/message pair: an action with the channel forgotten."""

    direction: Direction
    message: Message

    def __str__(self) -> str:
        return f"{self.direction.value}{self.message}"

    def dual(self) -> "ErasedSymbol":
        return ErasedSymbol(self.direction.flipped(), self.message)


ErasedTransition = tuple[str, ErasedSymbol, str]
Word = tuple[ErasedSymbol, ...]


def format_word(word: Word) -> str:
    return "ε" if not word else "·".join(str(s) for s in word)


@dataclass(frozen=True)
class ErasedAutomaton:
    """A finite automaton over erased symbols in which every state accepts.

    Erasure can merge actions that differed only in their channel, so the
    automaton may be nondeterministic even when the source machine was not.
    """

    states: frozenset[str]
    initial: str
    alphabet: frozenset[ErasedSymbol]
    transitions: frozenset[ErasedTransition]

    def __post_init__(self) -> None:
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} not among the states")
        for src, sym, dst in self.transitions:
            if src not in self.states or dst not in self.states:
                raise ValueError(f"transition {src!r} -> {dst!r} leaves the state set")
            if sym not in self.alphabet:
                raise ValueError(f"symbol {sym} not in the alphabet")

    @cached_property
    def _moves(self) -> dict[tuple[str, ErasedSymbol], frozenset[str]]:
        table: dict[tuple[str, ErasedSymbol], set[str]] = {}
        for src, sym, dst in self.transitions:
            table.setdefault((src, sym), set()).add(dst)
        return {k: frozenset(v) for k, v in table.items()}

    def move(self, subset: frozenset[str], symbol: ErasedSymbol) -> frozenset[str]:
        """All states reachable from ``subset`` by one ``symbol`` step."""
        out: set[str] = set()
        for q in subset:
            out |= self._moves.get((q, symbol), frozenset())
        return frozenset(out)


def erase_channels(m: Cfsm) -> ErasedAutomaton:
    """The automaton of ``m`` with every label stripped to direction+message."""
    transitions = frozenset(
        (src, ErasedSymbol(act.direction, act.message), dst)
        for src, act, dst in m.transitions
    )
    return ErasedAutomaton(
        states=m.states,
        initial=m.initial,
        alphabet=frozenset(sym for _, sym, _ in transitions),
        transitions=transitions,
    )


def dualize(a: ErasedAutomaton) -> ErasedAutomaton:
    """Flip every symbol's direction; the state graph is unchanged."""
    return ErasedAutomaton(
        states=a.states,
        initial=a.initial,
        alphabet=frozenset(sym.dual() for sym in a.alphabet),
        transitions=frozenset((src, sym.dual(), dst) for src, sym, dst in a.transitions),
    )


def separating_word(a: ErasedAutomaton, b: ErasedAutomaton) -> Optional[Word]:
    """A shortest word in exactly one of the two languages, or None if equal."""
    alphabet = sorted(a.alphabet | b.alphabet)
    start = (frozenset([a.initial]), frozenset([b.initial]))
    parents: dict[tuple[frozenset[str], frozenset[str]],
                  Optional[tuple[tuple[frozenset[str], frozenset[str]], ErasedSymbol]]] = {start: None}
    queue = deque([start])

    def word_to(key) -> Word:
        out = []
        while parents[key] is not None:
            key, sym = parents[key]
            out.append(sym)
        return tuple(reversed(out))

    while queue:
        key = queue.popleft()
        sa, sb = key
        for sym in alphabet:
            na = a.move(sa, sym)
            nb = b.move(sb, sym)
            if bool(na) != bool(nb):
                return word_to(key) + (sym,)
            if na:
                nxt = (na, nb)
                if nxt not in parents:
                    parents[nxt] = (key, sym)
                    queue.append(nxt)
    return None


def languages_equal(a: ErasedAutomaton, b: ErasedAutomaton) -> bool:
    """Whether the two automata recognize the same set of finite words."""
    return separating_word(a, b) is None
