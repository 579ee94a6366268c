import itertools

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from rpcrf.exceptions import DataFormatError, PatternSyntaxError, UnknownSymbolError
from rpcrf.patterns import (Alphabet, Concat, Literal, Repeat, Star, ast_matches, compile_to_nfa,
                            nfa_accepts, parse_pattern, parse_pattern_file, render_pattern_file)

from .helpers import pattern_texts, random_labels, random_pattern


class AlphabetTests(SimpleTestCase):
    def test_declaration_order_fixes_ids(self):
        alphabet = Alphabet.from_declaration("_ABCDEF")
        self.assertEqual(alphabet.size, 7)
        self.assertEqual(alphabet.index("_"), 0)
        self.assertEqual(alphabet.encode("_A_F"), [0, 1, 0, 6])
        self.assertEqual(alphabet.decode([6, 0]), "F_")

    def test_space_separated_declaration(self):
        self.assertEqual(Alphabet.from_declaration(" _ A B ").symbols, ("_", "A", "B"))

    def test_rejects_duplicates_and_metacharacters(self):
        with self.assertRaises(DataFormatError):
            Alphabet.from_declaration("AA")
        with self.assertRaises(DataFormatError):
            Alphabet.from_declaration("A*")
        with self.assertRaises(DataFormatError):
            Alphabet(())

    def test_unknown_symbol_reports_position(self):
        with self.assertRaises(UnknownSymbolError) as raised:
            Alphabet.from_declaration("AB").encode("ABC")
        self.assertEqual(raised.exception.position, 3)


class ParsePatternTests(SimpleTestCase):
    def setUp(self):
        self.abx = Alphabet.from_declaration("ABX")

    def test_abx_pattern(self):
        ast = parse_pattern("AX*A", self.abx)
        self.assertEqual(ast.root, Concat((Literal("A"), Star(Literal("X")), Literal("A"))))
        self.assertFalse(ast.anchored_start)
        self.assertFalse(ast.anchored_end)

    def test_single_literal(self):
        ast = parse_pattern("A", Alphabet.from_declaration("A"))
        self.assertEqual(ast.root, Literal("A"))

    def test_anchored_count_pattern(self):
        ast = parse_pattern("^(_*A){3}_*$", Alphabet.from_declaration("_A"))
        self.assertTrue(ast.anchored_start)
        self.assertTrue(ast.anchored_end)
        repeat = ast.root.parts[0]
        self.assertIsInstance(repeat, Repeat)
        self.assertEqual((repeat.low, repeat.high), (3, 3))

    def test_syntax_errors_carry_positions(self):
        cases = {
            "A(X": 1,
            "AX)": 2,
            "*A": 0,
            "A{2,1}": 1,
            "[]": 0,
            "A{": 2,
        }
        for text, position in cases.items():
            with self.subTest(text=text):
                with self.assertRaises(PatternSyntaxError) as raised:
                    parse_pattern(text, self.abx)
                self.assertEqual(raised.exception.position, position)

    def test_empty_pattern_is_rejected(self):
        with self.assertRaises(PatternSyntaxError):
            parse_pattern("", self.abx)

    def test_unknown_symbol(self):
        with self.assertRaises(UnknownSymbolError) as raised:
            parse_pattern("AXC", self.abx)
        self.assertEqual(raised.exception.symbol, "C")
        self.assertEqual(raised.exception.position, 2)

    @given(st.text(alphabet="ABX_()[]{}|*+?.^$\\,0123", max_size=12))
    @settings(max_examples=300, deadline=None)
    def test_parser_is_total(self, text):
        try:
            parse_pattern(text, self.abx)
        except PatternSyntaxError as e:
            self.assertGreaterEqual(e.position, 0)
        except UnknownSymbolError:
            pass


class CompileToNfaTests(SimpleTestCase):
    def accepted(self, text, alphabet, max_length):
        ast = parse_pattern(text, alphabet)
        nfa = compile_to_nfa(ast, alphabet)
        words = []
        for length in range(max_length + 1):
            for word in itertools.product(alphabet.symbols, repeat=length):
                if nfa_accepts(nfa, alphabet.encode(word)):
                    words.append("".join(word))
        return nfa, words

    def test_literal_has_two_states(self):
        nfa, words = self.accepted("A", Alphabet.from_declaration("A_"), 3)
        self.assertEqual(nfa.state_count, 2)
        self.assertEqual(words, ["A"])

    def test_star_accepts_empty_and_repeats(self):
        alphabet = Alphabet.from_declaration("AX")
        ast = parse_pattern("X*", alphabet)
        nfa = compile_to_nfa(ast, alphabet)
        rng = np.random.default_rng(7)
        for _ in range(20):
            word = random_labels(rng, alphabet, int(rng.integers(0, 6)))
            self.assertEqual(nfa_accepts(nfa, alphabet.encode(word)), set(word) <= {"X"})
        self.assertTrue(nfa_accepts(nfa, []))

    def test_bounded_repeat_expands(self):
        _, words = self.accepted("A_{4}A", Alphabet.from_declaration("A_"), 7)
        self.assertEqual(words, ["A____A"])

    def test_matches_recursive_matcher_on_random_patterns(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            symbols = "AB_"[:int(rng.integers(1, 4))]
            alphabet = Alphabet.from_declaration(symbols)
            ast = parse_pattern(random_pattern(rng, symbols, depth=4), alphabet)
            nfa = compile_to_nfa(ast, alphabet)
            for _ in range(100):
                word = random_labels(rng, alphabet, int(rng.integers(0, 9)))
                self.assertEqual(nfa_accepts(nfa, alphabet.encode(word)), ast_matches(ast, word, alphabet),
                                 msg=f"{ast.source_text!r} on {word!r}")

    @given(pattern_texts(), st.text(alphabet="AB_", max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_matches_recursive_matcher(self, text, word):
        alphabet = Alphabet.from_declaration("AB_")
        ast = parse_pattern(text, alphabet)
        self.assertEqual(nfa_accepts(compile_to_nfa(ast, alphabet), alphabet.encode(word)),
                         ast_matches(ast, word, alphabet))


class PatternFileTests(SimpleTestCase):
    def test_parse_with_comments(self):
        alphabet, patterns = parse_pattern_file("# two patterns\n\nalphabet: ABX\nAX*A\n# second\nBX*B\n")
        self.assertEqual(alphabet.symbols, ("A", "B", "X"))
        self.assertEqual(patterns, ["AX*A", "BX*B"])

    def test_alphabet_only_file(self):
        alphabet, patterns = parse_pattern_file("alphabet: _A\n")
        self.assertEqual(alphabet.size, 2)
        self.assertEqual(patterns, [])

    def test_missing_alphabet(self):
        with self.assertRaises(DataFormatError):
            parse_pattern_file("AX*A\n")
        with self.assertRaises(DataFormatError):
            parse_pattern_file("# nothing\n")

    def test_render_reads_back(self):
        alphabet = Alphabet.from_declaration("_A")
        text = render_pattern_file(alphabet, ["A____A"], comment="battleship")
        self.assertTrue(text.startswith("# battleship\n"))
        self.assertEqual(parse_pattern_file(text), (alphabet, ["A____A"]))
