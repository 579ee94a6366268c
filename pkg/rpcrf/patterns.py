"""
Label pattern parsing and Thompson NFA compilation

Patterns are regular expressions over a declared label alphabet. The supported
dialect is literals, `.`, `[...]`, concatenation, `|`, `*`, `+`, `?`, `{k}`,
`{m,n}`, parentheses and the `^` / `$` anchors. Anchors are recorded as flags
on the parsed pattern, never as tree nodes.
"""
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from .exceptions import DataFormatError, PatternSyntaxError, UnknownSymbolError

logger = logging.getLogger(__name__)

METACHARACTERS = frozenset("^$.|*+?()[]{}\\")
ALPHABET_PREFIX = "alphabet:"


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of single-character labels; order fixes the symbol ids"""
    symbols: Tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise DataFormatError("alphabet must declare at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise DataFormatError(f"alphabet has duplicate symbols: {''.join(self.symbols)!r}")
        for symbol in self.symbols:
            if len(symbol) != 1 or symbol.isspace() or symbol in METACHARACTERS or symbol == "#":
                raise DataFormatError(f"invalid label symbol {symbol!r}")
        object.__setattr__(self, "_ids", {s: i for i, s in enumerate(self.symbols)})

    @classmethod
    def from_declaration(cls, declaration: str) -> "Alphabet":
        """Parse `_AB` or `_ A B` into an alphabet"""
        declaration = declaration.strip()
        parts = declaration.split() if any(c.isspace() for c in declaration) else list(declaration)
        return cls(tuple(parts))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol) -> bool:
        return symbol in self._ids

    def index(self, symbol: str, position: Optional[int] = None) -> int:
        try:
            return self._ids[symbol]
        except KeyError:
            raise UnknownSymbolError(symbol, position) from None

    def encode(self, sequence: Sequence[str]) -> List[int]:
        """Map a label string to symbol ids (positions reported 1-based)"""
        return [self.index(symbol, i + 1) for i, symbol in enumerate(sequence)]

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self.symbols[i] for i in ids)

    def declaration(self) -> str:
        return "".join(self.symbols)


# AST nodes


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Literal:
    symbol: str


@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class CharClass:
    symbols: Tuple[str, ...]


@dataclass(frozen=True)
class Concat:
    parts: Tuple["Node", ...]


@dataclass(frozen=True)
class Alternation:
    options: Tuple["Node", ...]


@dataclass(frozen=True)
class Star:
    child: "Node"


@dataclass(frozen=True)
class Plus:
    child: "Node"


@dataclass(frozen=True)
class Opt:
    child: "Node"


@dataclass(frozen=True)
class Repeat:
    child: "Node"
    low: int
    high: int


Node = Union[Epsilon, Literal, Wildcard, CharClass, Concat, Alternation, Star, Plus, Opt, Repeat]


@dataclass(frozen=True)
class PatternAst:
    root: Node
    anchored_start: bool
    anchored_end: bool
    source_text: str


@dataclass(frozen=True)
class Nfa:
    """Thompson NFA; a transition symbol of None is an epsilon move"""
    state_count: int
    transitions: Tuple[Tuple[int, Optional[int], int], ...]
    initial: int
    accepting: FrozenSet[int]

    def __post_init__(self):
        states = [self.initial, *self.accepting]
        for source, _, target in self.transitions:
            states.extend((source, target))
        if any(not 0 <= s < self.state_count for s in states):
            raise ValueError("NFA references a state outside 0..state_count-1")

    def moves(self) -> Dict[int, List[Tuple[Optional[int], int]]]:
        table: Dict[int, List[Tuple[Optional[int], int]]] = {s: [] for s in range(self.state_count)}
        for source, symbol, target in self.transitions:
            table[source].append((symbol, target))
        return table


class _Parser:
    """Recursive-descent parser for one pattern string"""

    def __init__(self, text: str, alphabet: Alphabet):
        self.text = text
        self.alphabet = alphabet
        self.pos = 0
        self.end = len(text)

    def error(self, message: str, position: Optional[int] = None) -> PatternSyntaxError:
        return PatternSyntaxError(self.pos if position is None else position, message, self.text)

    def peek(self) -> Optional[str]:
        return self.text[self.pos] if self.pos < self.end else None

    def parse(self) -> PatternAst:
        anchored_start = anchored_end = False
        if self.peek() == "^":
            anchored_start = True
            self.pos += 1
        if self.end > self.pos and self.text[-1] == "$" and not self._escaped(self.end - 1):
            anchored_end = True
            self.end -= 1
        root = self.parse_alternation()
        if self.pos < self.end:
            char = self.text[self.pos]
            if char == ")":
                raise self.error("unbalanced ')'")
            raise self.error(f"unexpected {char!r}")
        return PatternAst(root=root, anchored_start=anchored_start,
                          anchored_end=anchored_end, source_text=self.text)

    def _escaped(self, index: int) -> bool:
        backslashes = 0
        while index - 1 - backslashes >= 0 and self.text[index - 1 - backslashes] == "\\":
            backslashes += 1
        return backslashes % 2 == 1

    def parse_alternation(self) -> Node:
        options = [self.parse_concat()]
        while self.peek() == "|" and self.pos < self.end:
            self.pos += 1
            options.append(self.parse_concat())
        return options[0] if len(options) == 1 else Alternation(tuple(options))

    def parse_concat(self) -> Node:
        parts = []
        while self.pos < self.end and self.peek() not in ("|", ")"):
            parts.append(self.parse_repeat())
        if not parts:
            return Epsilon()
        return parts[0] if len(parts) == 1 else Concat(tuple(parts))

    def parse_repeat(self) -> Node:
        node = self.parse_atom()
        while self.pos < self.end and self.peek() in ("*", "+", "?", "{"):
            char = self.peek()
            if char == "*":
                node = Star(node)
                self.pos += 1
            elif char == "+":
                node = Plus(node)
                self.pos += 1
            elif char == "?":
                node = Opt(node)
                self.pos += 1
            else:
                low, high = self.parse_bounds()
                node = Repeat(node, low, high)
        return node

    def parse_bounds(self) -> Tuple[int, int]:
        start = self.pos
        self.pos += 1
        low = self.parse_number()
        high = low
        if self.peek() == "," and self.pos < self.end:
            self.pos += 1
            high = self.parse_number()
        if self.peek() != "}" or self.pos >= self.end:
            raise self.error("expected '}' to close the repeat count")
        self.pos += 1
        if low > high:
            raise self.error(f"repeat bounds {{{low},{high}}} have min > max", start)
        return low, high

    def parse_number(self) -> int:
        start = self.pos
        while self.pos < self.end and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise self.error("expected a repeat count")
        return int(self.text[start:self.pos])

    def parse_atom(self) -> Node:
        char = self.peek()
        position = self.pos
        if char in ("*", "+", "?", "{"):
            raise self.error("nothing to repeat")
        if char == "(":
            self.pos += 1
            inner = self.parse_alternation()
            if self.peek() != ")" or self.pos >= self.end:
                raise self.error("missing ')'", position)
            self.pos += 1
            return inner
        if char == ".":
            self.pos += 1
            return Wildcard()
        if char == "[":
            return self.parse_class()
        if char in ("^", "$", "]", "}"):
            raise self.error(f"unexpected {char!r}")
        return Literal(self.parse_symbol())

    def parse_class(self) -> Node:
        start = self.pos
        self.pos += 1
        members: List[str] = []
        while self.pos < self.end and self.peek() != "]":
            symbol = self.parse_symbol()
            if symbol not in members:
                members.append(symbol)
        if self.pos >= self.end:
            raise self.error("missing ']'", start)
        self.pos += 1
        if not members:
            raise self.error("empty character class", start)
        ordered = tuple(s for s in self.alphabet.symbols if s in members)
        return CharClass(ordered)

    def parse_symbol(self) -> str:
        position = self.pos
        char = self.text[self.pos]
        if char == "\\":
            if self.pos + 1 >= self.end:
                raise self.error("dangling escape")
            char = self.text[self.pos + 1]
            self.pos += 2
        else:
            if char in METACHARACTERS:
                raise self.error(f"unexpected {char!r}")
            self.pos += 1
        if char not in self.alphabet:
            raise UnknownSymbolError(char, position)
        return char


def parse_pattern(text: str, alphabet: Alphabet) -> PatternAst:
    """
    Parse pattern text into an AST over the given alphabet

    Args:
        text: Pattern string, e.g. `AX*A` or `^(_*A){3}_*$`
        alphabet: Declared label alphabet

    Returns:
        PatternAst with anchors stripped from the core and kept as flags
    """
    if not text:
        raise PatternSyntaxError(0, "empty pattern", text)
    return _Parser(text, alphabet).parse()


def expand_repeats(node: Node) -> Node:
    """Rewrite bounded repeats into concatenations of copies"""
    if isinstance(node, Concat):
        return Concat(tuple(expand_repeats(p) for p in node.parts))
    if isinstance(node, Alternation):
        return Alternation(tuple(expand_repeats(o) for o in node.options))
    if isinstance(node, Star):
        return Star(expand_repeats(node.child))
    if isinstance(node, Plus):
        return Plus(expand_repeats(node.child))
    if isinstance(node, Opt):
        return Opt(expand_repeats(node.child))
    if isinstance(node, Repeat):
        if node.low < 0 or node.low > node.high:
            raise ValueError(f"invalid repeat bounds {node.low}..{node.high}")
        child = expand_repeats(node.child)
        parts = [child] * node.low + [Opt(child)] * (node.high - node.low)
        if not parts:
            return Epsilon()
        return parts[0] if len(parts) == 1 else Concat(tuple(parts))
    return node


class _ThompsonBuilder:

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet
        self.count = 0
        self.transitions: List[Tuple[int, Optional[int], int]] = []

    def new_state(self) -> int:
        self.count += 1
        return self.count - 1

    def edge(self, source: int, symbol: Optional[int], target: int):
        self.transitions.append((source, symbol, target))

    def build(self, node: Node) -> Tuple[int, int]:
        if isinstance(node, (Literal, Wildcard, CharClass, Epsilon)):
            start, end = self.new_state(), self.new_state()
            if isinstance(node, Literal):
                symbols: Sequence[Optional[int]] = [self.alphabet.index(node.symbol)]
            elif isinstance(node, Wildcard):
                symbols = range(self.alphabet.size)
            elif isinstance(node, CharClass):
                symbols = [self.alphabet.index(s) for s in node.symbols]
            else:
                symbols = [None]
            for symbol in symbols:
                self.edge(start, symbol, end)
            return start, end
        if isinstance(node, Concat):
            start, end = self.build(node.parts[0])
            for part in node.parts[1:]:
                part_start, part_end = self.build(part)
                self.edge(end, None, part_start)
                end = part_end
            return start, end
        if isinstance(node, Alternation):
            start, end = self.new_state(), self.new_state()
            for option in node.options:
                option_start, option_end = self.build(option)
                self.edge(start, None, option_start)
                self.edge(option_end, None, end)
            return start, end
        if isinstance(node, (Star, Plus, Opt)):
            start, end = self.new_state(), self.new_state()
            child_start, child_end = self.build(node.child)
            self.edge(start, None, child_start)
            self.edge(child_end, None, end)
            if not isinstance(node, Opt):
                self.edge(child_end, None, child_start)
            if not isinstance(node, Plus):
                self.edge(start, None, end)
            return start, end
        raise ValueError(f"unexpanded or unknown node {node!r}")


def compile_to_nfa(ast: PatternAst, alphabet: Alphabet) -> Nfa:
    """
    Thompson construction for the pattern core (anchors are not part of it)

    Args:
        ast: Parsed pattern
        alphabet: Alphabet the pattern was parsed against

    Returns:
        NFA accepting exactly the core language
    """
    builder = _ThompsonBuilder(alphabet)
    start, end = builder.build(expand_repeats(ast.root))
    return Nfa(state_count=builder.count, transitions=tuple(builder.transitions),
               initial=start, accepting=frozenset([end]))


def epsilon_closure(nfa: Nfa, states, moves=None) -> FrozenSet[int]:
    moves = moves if moves is not None else nfa.moves()
    closure: Set[int] = set(states)
    stack = list(states)
    while stack:
        state = stack.pop()
        for symbol, target in moves[state]:
            if symbol is None and target not in closure:
                closure.add(target)
                stack.append(target)
    return frozenset(closure)


def nfa_accepts(nfa: Nfa, ids: Sequence[int]) -> bool:
    """Simulate the NFA over a symbol-id sequence"""
    moves = nfa.moves()
    current = epsilon_closure(nfa, [nfa.initial], moves)
    for symbol in ids:
        step = {target for state in current for s, target in moves[state] if s == symbol}
        current = epsilon_closure(nfa, step, moves)
        if not current:
            return False
    return bool(current & nfa.accepting)


def _match_ends(node: Node, seq: Sequence[str], starts: FrozenSet[int], alphabet: Alphabet) -> FrozenSet[int]:
    """Positions reachable after matching node from any of the start offsets"""
    if isinstance(node, Epsilon):
        return starts
    if isinstance(node, (Literal, Wildcard, CharClass)):
        ends = set()
        for i in starts:
            if i < len(seq):
                symbol = seq[i]
                if (isinstance(node, Wildcard) and symbol in alphabet) \
                        or (isinstance(node, Literal) and symbol == node.symbol) \
                        or (isinstance(node, CharClass) and symbol in node.symbols):
                    ends.add(i + 1)
        return frozenset(ends)
    if isinstance(node, Concat):
        current = starts
        for part in node.parts:
            current = _match_ends(part, seq, current, alphabet)
            if not current:
                break
        return current
    if isinstance(node, Alternation):
        result: Set[int] = set()
        for option in node.options:
            result |= _match_ends(option, seq, starts, alphabet)
        return frozenset(result)
    if isinstance(node, Opt):
        return starts | _match_ends(node.child, seq, starts, alphabet)
    if isinstance(node, (Star, Plus)):
        reached: Set[int] = set() if isinstance(node, Plus) else set(starts)
        frontier = starts
        while frontier:
            step = _match_ends(node.child, seq, frontier, alphabet)
            frontier = frozenset(step - reached)
            reached |= step
        return frozenset(reached)
    if isinstance(node, Repeat):
        current = starts
        result = set(current) if node.low == 0 else set()
        for count in range(1, node.high + 1):
            current = _match_ends(node.child, seq, current, alphabet)
            if count >= node.low:
                result |= current
            if not current:
                break
        return frozenset(result)
    raise ValueError(f"unknown node {node!r}")


def ast_matches(ast: PatternAst, seq: Sequence[str], alphabet: Alphabet) -> bool:
    """Direct recursive membership test of a label string in the core language"""
    return len(seq) in _match_ends(ast.root, seq, frozenset([0]), alphabet)


def parse_pattern_file(text: str) -> Tuple[Alphabet, List[str]]:
    """
    Read a pattern file: `alphabet: <symbols>` then one pattern per line

    Args:
        text: File contents; `#` lines are comments, blank lines are ignored

    Returns:
        Tuple of (alphabet, pattern texts in declaration order)
    """
    alphabet: Optional[Alphabet] = None
    patterns: List[str] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if alphabet is None:
            if not line.startswith(ALPHABET_PREFIX):
                raise DataFormatError(f"line {line_number}: expected '{ALPHABET_PREFIX} <symbols>' first")
            alphabet = Alphabet.from_declaration(line[len(ALPHABET_PREFIX):])
            continue
        patterns.append(line)
    if alphabet is None:
        raise DataFormatError("pattern file declares no alphabet")
    logger.debug(f"Read pattern file with alphabet {alphabet.declaration()!r} and {len(patterns)} patterns")
    return alphabet, patterns


def render_pattern_file(alphabet: Alphabet, patterns: Sequence[str], comment: str = "") -> str:
    lines = [f"# {comment}"] if comment else []
    lines.append(f"{ALPHABET_PREFIX} {alphabet.declaration()}")
    lines.extend(patterns)
    return "\n".join(lines) + "\n"
