import itertools

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from rpcrf.automata import (Dfa, brute_force_end_positions, determinize, dfa_to_dot, distinguishing_word,
                            match_end_positions, minimize, suffix_closure)
from rpcrf.exceptions import UnknownSymbolError
from rpcrf.pattern_machine import compile_pattern
from rpcrf.patterns import Alphabet, compile_to_nfa, nfa_accepts, parse_pattern

from .helpers import pattern_texts, random_labels, random_pattern


def core_dfa(text, alphabet):
    ast = parse_pattern(text, alphabet)
    return ast, minimize(determinize(compile_to_nfa(ast, alphabet), alphabet))


def random_dfa(rng, state_count, symbol_count):
    transition = tuple(tuple(int(t) for t in rng.integers(state_count, size=symbol_count))
                       for _ in range(state_count))
    accepting = frozenset(int(s) for s in np.flatnonzero(rng.random(state_count) < 0.4))
    return Dfa(state_count=state_count, transition=transition, initial=0, accepting=accepting)


class DeterminizeTests(SimpleTestCase):
    def test_single_symbol_gets_a_sink(self):
        alphabet = Alphabet.from_declaration("A_")
        ast = parse_pattern("A", alphabet)
        dfa = determinize(compile_to_nfa(ast, alphabet), alphabet)
        self.assertEqual(dfa.state_count, 3)
        self.assertTrue(dfa.accepts([0]))
        self.assertFalse(dfa.accepts([0, 0]))
        self.assertFalse(dfa.accepts([1]))

    def test_preserves_language_of_random_patterns(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            symbols = "AB_"[:int(rng.integers(1, 4))]
            alphabet = Alphabet.from_declaration(symbols)
            nfa = compile_to_nfa(parse_pattern(random_pattern(rng, symbols), alphabet), alphabet)
            dfa = determinize(nfa, alphabet)
            for _ in range(200):
                ids = alphabet.encode(random_labels(rng, alphabet, int(rng.integers(0, 9))))
                self.assertEqual(dfa.accepts(ids), nfa_accepts(nfa, ids))

    def test_battleship_core_is_a_chain_plus_sink(self):
        alphabet = Alphabet.from_declaration("_A")
        _, dfa = core_dfa("A____A", alphabet)
        self.assertEqual(dfa.state_count, 8)
        self.assertEqual(len(dfa.accepting), 1)
        self.assertTrue(dfa.accepts(alphabet.encode("A____A")))


class MinimizeTests(SimpleTestCase):
    def test_minimal_dfa_is_unchanged(self):
        dfa = Dfa(state_count=3, transition=((1, 2), (1, 2), (2, 2)), initial=0, accepting=frozenset({1}))
        self.assertEqual(minimize(dfa), dfa)

    def test_bisimilar_accepting_states_merge(self):
        dfa = Dfa(state_count=4, transition=((1, 2), (1, 3), (3, 3), (1, 3)), initial=0,
                  accepting=frozenset({1, 3}))
        # 1 and 3 have identical futures
        self.assertEqual(minimize(dfa).state_count, 3)

    def test_random_dfas(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            symbol_count = int(rng.integers(1, 4))
            dfa = random_dfa(rng, int(rng.integers(1, 13)), symbol_count)
            small = minimize(dfa)
            self.assertEqual(minimize(small).state_count, small.state_count)
            for _ in range(200):
                ids = rng.integers(symbol_count, size=int(rng.integers(0, 10))).tolist()
                self.assertEqual(small.accepts(ids), dfa.accepts(ids))
            for a, b in itertools.combinations(range(small.state_count), 2):
                word = distinguishing_word(small, a, b, max_length=small.state_count - 1)
                self.assertIsNotNone(word, msg=f"states {a} and {b} are equivalent")

    def test_result_is_complete(self):
        rng = np.random.default_rng(3)
        alphabet = Alphabet.from_declaration("AB_")
        for _ in range(30):
            _, dfa = core_dfa(random_pattern(rng, "AB_"), alphabet)
            for row in dfa.transition:
                self.assertEqual(len(row), alphabet.size)
                self.assertTrue(all(0 <= t < dfa.state_count for t in row))


class SuffixClosureTests(SimpleTestCase):
    def test_single_symbol(self):
        alphabet = Alphabet.from_declaration("A_")
        _, core = core_dfa("A", alphabet)
        closed = suffix_closure(core, False, alphabet)
        self.assertEqual(closed.state_count, 2)
        for word in ("A", "_A", "A_A", "__A"):
            self.assertTrue(closed.accepts(alphabet.encode(word)))
        for word in ("", "_", "A_"):
            self.assertFalse(closed.accepts(alphabet.encode(word)))

    def test_abx_pattern_has_three_states(self):
        alphabet = Alphabet.from_declaration("ABX")
        _, core = core_dfa("AX*A", alphabet)
        self.assertEqual(suffix_closure(core, False, alphabet).state_count, 3)

    def test_anchored_core_is_returned_unchanged(self):
        alphabet = Alphabet.from_declaration("_A")
        _, core = core_dfa("(_*A){3}_*", alphabet)
        self.assertIs(suffix_closure(core, True, alphabet), core)

    def test_empty_matching_core_logs_a_warning(self):
        alphabet = Alphabet.from_declaration("AB")
        _, core = core_dfa("A*", alphabet)
        with self.assertLogs("rpcrf.automata", level="WARNING"):
            closed = suffix_closure(core, False, alphabet)
        self.assertFalse(closed.accepts([]))
        self.assertTrue(closed.accepts(alphabet.encode("BA")))

    @given(pattern_texts(), st.text(alphabet="AB_", min_size=1, max_size=10))
    @settings(max_examples=300, deadline=None)
    def test_end_positions_match_substring_oracle(self, text, y):
        alphabet = Alphabet.from_declaration("AB_")
        pattern = compile_pattern(0, text, alphabet)
        self.assertEqual(match_end_positions(pattern.dfa, pattern.anchored_end, y, alphabet),
                         brute_force_end_positions(pattern.ast, y, alphabet))


class MatchEndPositionsTests(SimpleTestCase):
    def test_abx_positions(self):
        alphabet = Alphabet.from_declaration("ABX")
        first = compile_pattern(0, "AX*A", alphabet)
        second = compile_pattern(1, "BX*B", alphabet)
        self.assertEqual(match_end_positions(first.dfa, False, "BAXAA", alphabet), {4, 5})
        self.assertEqual(match_end_positions(second.dfa, False, "BAXAA", alphabet), set())

    def test_end_anchored_count_pattern(self):
        alphabet = Alphabet.from_declaration("_A")
        pattern = compile_pattern(0, "^(_*A){3}_*$", alphabet)
        self.assertEqual(match_end_positions(pattern.dfa, True, "__A_AA____", alphabet), {10})
        self.assertEqual(match_end_positions(pattern.dfa, True, "__A_A_____", alphabet), set())

    def test_unknown_label(self):
        alphabet = Alphabet.from_declaration("_A")
        pattern = compile_pattern(0, "A", alphabet)
        with self.assertRaises(UnknownSymbolError):
            match_end_positions(pattern.dfa, False, "AB", alphabet)


class DotTests(SimpleTestCase):
    def test_dot_lists_states_and_merges_edges(self):
        alphabet = Alphabet.from_declaration("A_")
        _, core = core_dfa("A", alphabet)
        dot = dfa_to_dot(suffix_closure(core, False, alphabet), alphabet, name="ends_in_A")
        self.assertTrue(dot.startswith('digraph "ends_in_A" {'))
        self.assertIn("doublecircle", dot)
        self.assertIn("__start -> q0;", dot)
        self.assertEqual(dot.count("->"), 1 + 4)
