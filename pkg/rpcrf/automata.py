"""
Deterministic automata over label alphabets

Subset construction, Hopcroft minimization, suffix closure and match-position
queries. Every Dfa produced here is complete: each (state, symbol) pair has a
target, with an explicit sink where the language needs one.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .patterns import Alphabet, Nfa, PatternAst, ast_matches, epsilon_closure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dfa:
    """Complete DFA stored as a dense state x symbol table"""
    state_count: int
    transition: Tuple[Tuple[int, ...], ...]
    initial: int
    accepting: FrozenSet[int]

    def __post_init__(self):
        if len(self.transition) != self.state_count or self.state_count < 1:
            raise ValueError("transition table must have one row per state")
        widths = {len(row) for row in self.transition}
        if len(widths) != 1:
            raise ValueError("transition table rows must cover the same alphabet")
        for row in self.transition:
            if any(not 0 <= target < self.state_count for target in row):
                raise ValueError("transition target outside the state range")
        if not 0 <= self.initial < self.state_count:
            raise ValueError("initial state outside the state range")
        if any(not 0 <= s < self.state_count for s in self.accepting):
            raise ValueError("accepting state outside the state range")

    @property
    def symbol_count(self) -> int:
        return len(self.transition[0])

    def step(self, state: int, symbol: int) -> int:
        return self.transition[state][symbol]

    def run(self, ids: Sequence[int]) -> List[int]:
        """States reached after each consumed symbol"""
        state = self.initial
        visited = []
        for symbol in ids:
            state = self.transition[state][symbol]
            visited.append(state)
        return visited

    def accepts(self, ids: Sequence[int]) -> bool:
        state = self.initial
        for symbol in ids:
            state = self.transition[state][symbol]
        return state in self.accepting

    def to_dict(self) -> Dict:
        return {
            "state_count": self.state_count,
            "transition": [list(row) for row in self.transition],
            "initial": self.initial,
            "accepting": sorted(self.accepting),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Dfa":
        return cls(state_count=data["state_count"],
                   transition=tuple(tuple(row) for row in data["transition"]),
                   initial=data["initial"], accepting=frozenset(data["accepting"]))


def determinize(nfa: Nfa, alphabet: Alphabet) -> Dfa:
    """
    Subset construction; the empty subset becomes the sink when reached

    Args:
        nfa: Source automaton
        alphabet: Symbols to make the result complete over

    Returns:
        Complete DFA accepting the NFA's language
    """
    moves = nfa.moves()
    start = epsilon_closure(nfa, [nfa.initial], moves)
    ids: Dict[FrozenSet[int], int] = {start: 0}
    rows: List[List[int]] = []
    worklist = deque([start])
    order = [start]
    while worklist:
        subset = worklist.popleft()
        row = []
        for symbol in range(alphabet.size):
            step = {target for state in subset for s, target in moves[state] if s == symbol}
            target_set = epsilon_closure(nfa, step, moves)
            if target_set not in ids:
                ids[target_set] = len(order)
                order.append(target_set)
                worklist.append(target_set)
            row.append(ids[target_set])
        rows.append(row)
    accepting = frozenset(ids[s] for s in order if s & nfa.accepting)
    return Dfa(state_count=len(order), transition=tuple(tuple(r) for r in rows),
               initial=0, accepting=accepting)


def reachable_states(dfa: Dfa) -> List[int]:
    """States reachable from the initial state, in breadth-first symbol order"""
    seen = {dfa.initial}
    order = [dfa.initial]
    queue = deque([dfa.initial])
    while queue:
        state = queue.popleft()
        for target in dfa.transition[state]:
            if target not in seen:
                seen.add(target)
                order.append(target)
                queue.append(target)
    return order


def _hopcroft_partition(dfa: Dfa, states: List[int]) -> List[FrozenSet[int]]:
    live = set(states)
    accepting = frozenset(s for s in states if s in dfa.accepting)
    rejecting = frozenset(live - accepting)
    partition: Set[FrozenSet[int]] = {block for block in (accepting, rejecting) if block}
    waiting: Set[FrozenSet[int]] = set(partition)

    inverse: List[Dict[int, Set[int]]] = [dict() for _ in range(dfa.symbol_count)]
    for state in states:
        for symbol, target in enumerate(dfa.transition[state]):
            inverse[symbol].setdefault(target, set()).add(state)

    while waiting:
        splitter = waiting.pop()
        for symbol in range(dfa.symbol_count):
            predecessors: Set[int] = set()
            for target in splitter:
                predecessors |= inverse[symbol].get(target, set())
            if not predecessors:
                continue
            for block in list(partition):
                inside = block & predecessors
                if not inside or inside == block:
                    continue
                outside = block - inside
                inside, outside = frozenset(inside), frozenset(outside)
                partition.remove(block)
                partition.update((inside, outside))
                if block in waiting:
                    waiting.remove(block)
                    waiting.update((inside, outside))
                else:
                    waiting.add(inside if len(inside) <= len(outside) else outside)
    return list(partition)


def minimize(dfa: Dfa) -> Dfa:
    """
    Minimal complete DFA for the same language

    Unreachable states are dropped, equivalent states merged by Hopcroft
    partition refinement, and the result renumbered breadth-first from the
    initial state so equal languages give identical tables.
    """
    states = reachable_states(dfa)
    blocks = _hopcroft_partition(dfa, states)
    block_of = {state: index for index, block in enumerate(blocks) for state in block}
    quotient_rows = []
    for block in blocks:
        representative = min(block)
        quotient_rows.append(tuple(block_of[t] for t in dfa.transition[representative]))
    quotient = Dfa(state_count=len(blocks), transition=tuple(quotient_rows),
                   initial=block_of[dfa.initial],
                   accepting=frozenset(i for i, b in enumerate(blocks) if b & dfa.accepting))
    return canonical_numbering(quotient)


def canonical_numbering(dfa: Dfa) -> Dfa:
    """Renumber reachable states breadth-first from the initial state"""
    order = reachable_states(dfa)
    renumber = {state: index for index, state in enumerate(order)}
    rows = tuple(tuple(renumber[t] for t in dfa.transition[state]) for state in order)
    return Dfa(state_count=len(order), transition=rows, initial=0,
               accepting=frozenset(renumber[s] for s in order if s in dfa.accepting))


def suffix_closure(core: Dfa, anchored_start: bool, alphabet: Alphabet) -> Dfa:
    """
    DFA accepting label sequences with a nonempty suffix in the core language

    Args:
        core: Complete DFA for the pattern core
        anchored_start: When set, matches must start at position 1 and the
            core is returned as is
        alphabet: Label alphabet

    Returns:
        Minimal complete DFA for Σ*·(L minus the empty string), or the core
    """
    if core.initial in core.accepting:
        logger.warning("Pattern core matches the empty sequence; "
                       "empty matches never fire on their own")
    if anchored_start:
        return core
    # state 0 loops on Σ, state 1 is a non-accepting copy of the core initial
    # state, core states follow shifted by 2
    shift = 2
    transitions = [(0, symbol, 0) for symbol in range(alphabet.size)]
    transitions.append((0, None, 1))
    for symbol, target in enumerate(core.transition[core.initial]):
        transitions.append((1, symbol, target + shift))
    for state, row in enumerate(core.transition):
        for symbol, target in enumerate(row):
            transitions.append((state + shift, symbol, target + shift))
    nfa = Nfa(state_count=core.state_count + shift, transitions=tuple(transitions), initial=0,
              accepting=frozenset(s + shift for s in core.accepting))
    return minimize(determinize(nfa, alphabet))


def match_end_positions(dfa: Dfa, anchored_end: bool, y: Sequence[str], alphabet: Alphabet) -> Set[int]:
    """
    1-based positions i where the run over y is accepting after y_1..y_i

    End-anchored patterns only report i = len(y); position 0 never fires.
    """
    ids = alphabet.encode(y)
    visited = dfa.run(ids)
    positions = {i + 1 for i, state in enumerate(visited) if state in dfa.accepting}
    if anchored_end:
        positions &= {len(ids)}
    return positions


def brute_force_end_positions(ast: PatternAst, y: Sequence[str], alphabet: Alphabet) -> Set[int]:
    """Reference positions from checking every substring y_j..y_i with the AST matcher"""
    alphabet.encode(y)
    length = len(y)
    positions = set()
    for i in range(1, length + 1):
        starts = [1] if ast.anchored_start else range(1, i + 1)
        if any(ast_matches(ast, y[j - 1:i], alphabet) for j in starts):
            positions.add(i)
    if ast.anchored_end:
        positions &= {length}
    return positions


def distinguishing_word(dfa: Dfa, a: int, b: int, max_length: Optional[int] = None) -> Optional[Tuple[int, ...]]:
    """Shortest symbol word telling states a and b apart, if any"""
    max_length = dfa.state_count if max_length is None else max_length
    seen = {(a, b)}
    queue = deque([(a, b, ())])
    while queue:
        p, q, word = queue.popleft()
        if (p in dfa.accepting) != (q in dfa.accepting):
            return word
        if len(word) >= max_length:
            continue
        for symbol in range(dfa.symbol_count):
            pair = (dfa.transition[p][symbol], dfa.transition[q][symbol])
            if pair not in seen:
                seen.add(pair)
                queue.append((pair[0], pair[1], word + (symbol,)))
    return None


def _quote(text: str) -> str:
    return '"{}"'.format(text.replace('"', r'\"'))


def dot_lines(state_count: int, initial: int, accepting: Iterable[int],
              edges: Iterable[Tuple[int, str, int]], state_labels: Optional[Dict[int, str]] = None,
              name: str = "dfa") -> Iterator[str]:
    """
    Graphviz DOT source as lines

    States are `q<id>`; accepting states are double circles and parallel
    edges are merged into one arrow with a comma-separated label.
    """
    accepting = set(accepting)
    state_labels = state_labels or {}
    yield f"digraph {_quote(name)} {{\n"
    yield "  rankdir=LR;\n"
    yield '  __start [shape=point, label=""];\n'
    for state in range(state_count):
        shape = "doublecircle" if state in accepting else "circle"
        label = f"q{state}"
        if state in state_labels:
            label += r"\n" + state_labels[state]
        yield f"  q{state} [shape={shape}, label={_quote(label)}];\n"
    yield f"  __start -> q{initial};\n"
    merged: Dict[Tuple[int, int], List[str]] = {}
    for source, symbol, target in edges:
        merged.setdefault((source, target), []).append(symbol)
    for (source, target), symbols in merged.items():
        yield f"  q{source} -> q{target} [label={_quote(','.join(symbols))}];\n"
    yield "}\n"


def dfa_to_dot(dfa: Dfa, alphabet: Alphabet, name: str = "dfa") -> str:
    edges = ((state, alphabet.symbols[symbol], target)
             for state, row in enumerate(dfa.transition)
             for symbol, target in enumerate(row))
    return "".join(dot_lines(dfa.state_count, dfa.initial, dfa.accepting, edges, name=name))
