"""
State-labeled product machine over a pattern set

Each pattern is compiled to a minimal suffix-closed DFA; the product of these
DFAs, pruned to states reachable from the initial tuple, tells at every step
which patterns match the label sequence ending there. The arcs of the product
are the label set of the auxiliary linear-chain CRF.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from .automata import Dfa, determinize, dot_lines, minimize, suffix_closure
from .exceptions import DataFormatError, ProductSizeExceeded
from .patterns import Alphabet, PatternAst, compile_to_nfa, parse_pattern

logger = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 1_000_000


@dataclass(frozen=True)
class CompiledPattern:
    pattern_id: int
    ast: PatternAst
    dfa: Dfa
    anchored_end: bool
    core_size: int

    @property
    def text(self) -> str:
        return self.ast.source_text


def compile_pattern(pattern_id: int, text: str, alphabet: Alphabet) -> CompiledPattern:
    """Parse one pattern and build its minimal suffix-closed DFA"""
    ast = parse_pattern(text, alphabet)
    core = minimize(determinize(compile_to_nfa(ast, alphabet), alphabet))
    dfa = suffix_closure(core, ast.anchored_start, alphabet)
    logger.debug(f"Pattern {pattern_id} {text!r}: core {core.state_count} states, "
                 f"closed {dfa.state_count} states")
    return CompiledPattern(pattern_id=pattern_id, ast=ast, dfa=dfa,
                           anchored_end=ast.anchored_end, core_size=core.state_count)


@dataclass(frozen=True)
class PatternSet:
    """Ordered patterns sharing one alphabet; ids follow declaration order"""
    alphabet: Alphabet
    patterns: Tuple[CompiledPattern, ...]

    def __post_init__(self):
        for expected, pattern in enumerate(self.patterns):
            if pattern.pattern_id != expected:
                raise ValueError("pattern ids must be 0..n-1 in declaration order")

    @classmethod
    def from_texts(cls, texts: Sequence[str], alphabet: Alphabet) -> "PatternSet":
        return cls(alphabet=alphabet,
                   patterns=tuple(compile_pattern(i, text, alphabet) for i, text in enumerate(texts)))

    @property
    def texts(self) -> Tuple[str, ...]:
        return tuple(p.text for p in self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)


@dataclass(frozen=True)
class MachineState:
    components: Tuple[int, ...]
    labels: FrozenSet[int]


@dataclass(frozen=True)
class Arc:
    arc_id: int
    source: int
    symbol: int
    target: int


@dataclass(frozen=True)
class LabeledProductDfa:
    """
    Product DFA whose states carry the set of patterns accepting there

    Arc ids are dense and ordered by source state, then symbol id, so the arc
    for (q, a) is q * |Σ| + a.
    """
    alphabet: Alphabet
    pattern_texts: Tuple[str, ...]
    end_anchored: Tuple[bool, ...]
    states: Tuple[MachineState, ...]
    transition: Tuple[Tuple[int, ...], ...]
    initial: int = 0
    arcs: Tuple[Arc, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        width = self.alphabet.size
        if len(self.transition) != len(self.states) or any(len(row) != width for row in self.transition):
            raise ValueError("transition table must be complete over the alphabet")
        arcs = tuple(Arc(arc_id=q * width + a, source=q, symbol=a, target=self.transition[q][a])
                     for q in range(len(self.states)) for a in range(width))
        object.__setattr__(self, "arcs", arcs)
        labels = np.zeros((len(self.states), len(self.pattern_texts)), dtype=bool)
        for q, state in enumerate(self.states):
            for pattern_id in state.labels:
                labels[q, pattern_id] = True
        object.__setattr__(self, "label_matrix", labels)
        object.__setattr__(self, "arc_sources", np.array([arc.source for arc in arcs], dtype=np.int64))
        object.__setattr__(self, "arc_symbols", np.array([arc.symbol for arc in arcs], dtype=np.int64))
        object.__setattr__(self, "arc_targets", np.array([arc.target for arc in arcs], dtype=np.int64))

    @property
    def state_count(self) -> int:
        return len(self.states)

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    @property
    def pattern_count(self) -> int:
        return len(self.pattern_texts)

    def arc_id(self, source: int, symbol: int) -> int:
        return source * self.alphabet.size + symbol

    def firing_mask(self, position: int, length: int) -> np.ndarray:
        """Patterns allowed to fire at a 1-based position of a length-N sequence"""
        if position == length:
            return np.ones(self.pattern_count, dtype=bool)
        return ~np.array(self.end_anchored, dtype=bool)

    def fired_at(self, state: int, position: int, length: int) -> FrozenSet[int]:
        labels = self.states[state].labels
        if position == length:
            return labels
        return frozenset(p for p in labels if not self.end_anchored[p])

    def to_dict(self) -> Dict:
        return {
            "alphabet": self.alphabet.declaration(),
            "patterns": list(self.pattern_texts),
            "end_anchored": list(self.end_anchored),
            "initial": self.initial,
            "states": [{"components": list(s.components), "labels": sorted(s.labels)} for s in self.states],
            "transition": [list(row) for row in self.transition],
            "arcs": [[arc.source, arc.symbol, arc.target] for arc in self.arcs],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "LabeledProductDfa":
        try:
            machine = cls(
                alphabet=Alphabet.from_declaration(data["alphabet"]),
                pattern_texts=tuple(data["patterns"]),
                end_anchored=tuple(bool(v) for v in data["end_anchored"]),
                states=tuple(MachineState(components=tuple(s["components"]), labels=frozenset(s["labels"]))
                             for s in data["states"]),
                transition=tuple(tuple(row) for row in data["transition"]),
                initial=data["initial"],
            )
        except (KeyError, TypeError) as e:
            raise DataFormatError(f"malformed machine serialization: {e}") from e
        if [[a.source, a.symbol, a.target] for a in machine.arcs] != data["arcs"]:
            raise DataFormatError("serialized arc enumeration disagrees with the transition table")
        return machine

    def to_dot(self, name: str = "pattern_machine") -> str:
        """DOT rendering with every state annotated by its pattern set"""
        labels = {}
        for q, state in enumerate(self.states):
            labels[q] = "{" + ",".join(f"L{p}" for p in sorted(state.labels)) + "}" if state.labels else "∅"
        edges = ((arc.source, self.alphabet.symbols[arc.symbol], arc.target) for arc in self.arcs)
        accepting = [q for q, state in enumerate(self.states) if state.labels]
        return "".join(dot_lines(self.state_count, self.initial, accepting, edges,
                                 state_labels=labels, name=name))


def build_pattern_machine(pattern_set: PatternSet, max_states: int = DEFAULT_MAX_STATES) -> LabeledProductDfa:
    """
    Breadth-first product of the component DFAs from the initial tuple

    Args:
        pattern_set: Compiled patterns; an empty set gives the one-state machine
            of a plain linear-chain CRF
        max_states: Cap on reachable product states

    Returns:
        Pruned, complete, state-labeled product machine
    """
    alphabet = pattern_set.alphabet
    components = [p.dfa for p in pattern_set.patterns]
    start = tuple(dfa.initial for dfa in components)
    ids: Dict[Tuple[int, ...], int] = {start: 0}
    order = [start]
    rows: List[Tuple[int, ...]] = []
    queue = deque([start])
    while queue:
        current = queue.popleft()
        row = []
        for symbol in range(alphabet.size):
            target = tuple(dfa.transition[s][symbol] for dfa, s in zip(components, current))
            if target not in ids:
                if len(order) >= max_states:
                    logger.error(f"Product machine exceeded {max_states} states")
                    raise ProductSizeExceeded(max_states)
                ids[target] = len(order)
                order.append(target)
                queue.append(target)
            row.append(ids[target])
        rows.append(tuple(row))
    states = tuple(
        MachineState(components=tup,
                     labels=frozenset(i for i, (dfa, s) in enumerate(zip(components, tup)) if s in dfa.accepting))
        for tup in order
    )
    machine = LabeledProductDfa(alphabet=alphabet, pattern_texts=pattern_set.texts,
                                end_anchored=tuple(p.anchored_end for p in pattern_set.patterns),
                                states=states, transition=tuple(rows), initial=0)
    logger.info(f"Built pattern machine: {machine.state_count} states, {machine.arc_count} arcs, "
                f"{len(pattern_set)} patterns")
    return machine


def path_of(machine: LabeledProductDfa, y: Sequence[str]) -> List[int]:
    """Arc ids of the unique run of the machine over the label sequence"""
    state = machine.initial
    path = []
    for symbol in machine.alphabet.encode(y):
        path.append(machine.arc_id(state, symbol))
        state = machine.transition[state][symbol]
    return path


def fired_patterns(machine: LabeledProductDfa, y: Sequence[str]) -> List[FrozenSet[int]]:
    """Per position, the patterns whose match ends there"""
    length = len(y)
    return [machine.fired_at(machine.arcs[arc_id].target, i, length)
            for i, arc_id in enumerate(path_of(machine, y), start=1)]


def worst_case_size(pattern_set: PatternSet) -> int:
    """Product of the component sizes; the bound pruning is measured against"""
    size = 1
    for pattern in pattern_set.patterns:
        size *= pattern.dfa.state_count
    return size
