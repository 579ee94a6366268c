"""Shared builders for the rpcrf tests"""
import itertools
from typing import List, Sequence

import numpy as np
from hypothesis import strategies as st

from rpcrf.pattern_machine import PatternSet, build_pattern_machine
from rpcrf.patterns import Alphabet
from rpcrf.potentials import FeatureConfig, FeatureIndex, ModelParams

ABX_ALPHABET = Alphabet.from_declaration("ABX")
ABX_PATTERNS = ["AX*A", "BX*B"]


def abx_machine():
    return build_pattern_machine(PatternSet.from_texts(ABX_PATTERNS, ABX_ALPHABET))


def random_pattern(rng: np.random.Generator, symbols: str, depth: int = 3) -> str:
    """Random pattern text of nesting depth <= depth, anchors included at random"""
    def node(level):
        choice = int(rng.integers(0, 7 if level > 0 else 3))
        if choice == 0:
            return symbols[int(rng.integers(len(symbols)))]
        if choice == 1:
            return "."
        if choice == 2:
            size = int(rng.integers(1, len(symbols) + 1))
            return "[" + "".join(rng.choice(list(symbols), size=size, replace=False)) + "]"
        if choice == 3:
            return node(level - 1) + node(level - 1)
        if choice == 4:
            return "(" + node(level - 1) + "|" + node(level - 1) + ")"
        if choice == 5:
            return "(" + node(level - 1) + ")" + "*+?"[int(rng.integers(3))]
        low = int(rng.integers(0, 3))
        return "(" + node(level - 1) + "){%d,%d}" % (low, low + int(rng.integers(0, 2)))

    text = node(depth)
    if rng.random() < 0.25:
        text = "^" + text
    if rng.random() < 0.25:
        text = text + "$"
    return text


@st.composite
def pattern_texts(draw, symbols: str = "AB_", max_depth: int = 3):
    """Hypothesis strategy for pattern text over the given symbols"""
    atoms = st.one_of(st.sampled_from(list(symbols) + ["."]),
                      st.sets(st.sampled_from(list(symbols)), min_size=1).map(lambda s: "[" + "".join(sorted(s)) + "]"))
    tree = st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.tuples(inner, inner).map("".join),
            st.tuples(inner, inner).map(lambda p: f"({p[0]}|{p[1]})"),
            st.tuples(inner, st.sampled_from("*+?")).map(lambda p: f"({p[0]}){p[1]}"),
            st.tuples(inner, st.integers(0, 2), st.integers(0, 1)).map(lambda p: f"({p[0]}){{{p[1]},{p[1] + p[2]}}}"),
        ),
        max_leaves=2 ** max_depth,
    )
    text = draw(tree)
    if draw(st.booleans()):
        text = "^" + text
    if draw(st.booleans()):
        text = text + "$"
    return text


def random_labels(rng: np.random.Generator, alphabet: Alphabet, length: int) -> str:
    return alphabet.decode(rng.integers(alphabet.size, size=length).tolist())


def random_input(rng: np.random.Generator, length: int, tokens: str = "01") -> str:
    return "".join(rng.choice(list(tokens), size=length))


def random_params(rng: np.random.Generator, alphabet: Alphabet, pattern_count: int, config: FeatureConfig,
                  inputs: Sequence[str], scale: float = 2.0):
    """Uniform weights in [-scale, scale] for every feature the inputs can activate"""
    index = FeatureIndex.for_inputs(alphabet, pattern_count, config, inputs)
    vector = rng.uniform(-scale, scale, size=len(index))
    return ModelParams.from_vector(index, vector, alphabet, pattern_count), index


def all_labelings(alphabet: Alphabet, length: int) -> List[str]:
    return ["".join(y) for y in itertools.product(alphabet.symbols, repeat=length)]
