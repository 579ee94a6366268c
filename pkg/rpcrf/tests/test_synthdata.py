import gzip
import os
import tempfile
from collections import Counter
from fractions import Fraction

from django.test import SimpleTestCase

from rpcrf.crf import Example
from rpcrf.exceptions import DataFormatError
from rpcrf.patterns import Alphabet, parse_pattern_file
from rpcrf.synthdata import (AGREEMENT, AGREEMENT_PAIRS, BATTLESHIP, CARDINALITY, SHIP_PLACEMENTS, TASKS,
                             TaskSpec, baseline_patterns, exact_match_accuracy, expected_accuracy, gen_agreement,
                             gen_battleship, gen_cardinality, generate, joint_distribution, optimal_accuracy,
                             read_dataset, render_grid, standard_patterns, task_patterns, token_accuracy,
                             write_dataset)


def grid(*rows):
    return "".join(rows)


BATTLESHIP_GRIDS = [
    (grid("00000", "00000", "00010", "00000", "00000"),
     grid("___A_", "___A_", "___A_", "___A_", "_____")),
    (grid("00000", "00000", "10000", "00000", "00000"),
     grid("_____", "_____", "AAAA_", "_____", "_____")),
    (grid("00000", "00000", "10000", "00000", "00000"),
     grid("_____", "A____", "A____", "A____", "A____")),
]


def support(task):
    return {(x, y) for x, y, _ in joint_distribution(task)}


class TaskSpecTests(SimpleTestCase):
    def test_default_seeds(self):
        self.assertEqual([TaskSpec(task).seed for task in TASKS], [1, 2, 3])

    def test_validation(self):
        with self.assertRaises(DataFormatError):
            TaskSpec("pos-tagging")
        with self.assertRaises(DataFormatError):
            TaskSpec(CARDINALITY, train_size=0)
        with self.assertRaises(DataFormatError):
            TaskSpec(CARDINALITY, seed=-1)

    def test_wrong_generator(self):
        with self.assertRaises(DataFormatError):
            gen_agreement(TaskSpec(CARDINALITY, train_size=1, test_size=1))


class CardinalityTests(SimpleTestCase):
    def test_sample_pair_is_valid(self):
        self.assertIn(("3000000000", "__A_AA____"), support(CARDINALITY))

    def test_postconditions(self):
        dataset = gen_cardinality(TaskSpec(CARDINALITY, train_size=10_000, test_size=1))
        for example in dataset.train:
            k = int(example.x[0])
            self.assertTrue(1 <= k <= 9)
            self.assertEqual(example.x[1:], "0" * 9)
            self.assertEqual(example.y[0], "_")
            self.assertEqual(example.y.count("A"), k)
            self.assertEqual(set(example.y), {"_", "A"})

    def test_count_is_uniform(self):
        dataset = gen_cardinality(TaskSpec(CARDINALITY, train_size=90_000, test_size=1))
        counts = Counter(example.x[0] for example in dataset.train)
        self.assertEqual(sorted(counts), list("123456789"))
        for k in range(1, 10):
            self.assertAlmostEqual(counts[str(k)] / 90_000, 1 / 9, delta=0.01, msg=k)


class AgreementTests(SimpleTestCase):
    def test_sample_pair_is_valid(self):
        self.assertIn(("0010000100", "__A____B__"), support(AGREEMENT))

    def test_postconditions(self):
        valid = {frozenset(pair) for pair in AGREEMENT_PAIRS}
        dataset = gen_agreement(TaskSpec(AGREEMENT, train_size=10_000, test_size=1))
        for example in dataset.train:
            ones = [i for i, token in enumerate(example.x) if token == "1"]
            self.assertEqual(len(ones), 2)
            self.assertEqual(example.x.count("0"), 8)
            self.assertIn(frozenset(example.y[i] for i in ones), valid)
            self.assertTrue(all(example.y[i] == "_" for i in range(10) if i not in ones))

    def test_orientations_are_uniform(self):
        dataset = gen_agreement(TaskSpec(AGREEMENT, train_size=60_000, test_size=1))
        counts = Counter("".join(label for label in example.y if label != "_") for example in dataset.train)
        self.assertEqual(sorted(counts), ["AB", "BA", "CD", "DC", "EF", "FE"])
        for orientation, count in counts.items():
            self.assertAlmostEqual(count / 60_000, 1 / 6, delta=0.01, msg=orientation)


class BattleshipTests(SimpleTestCase):
    def test_placements(self):
        self.assertEqual(len(SHIP_PLACEMENTS), 20)
        self.assertEqual(len(set(SHIP_PLACEMENTS)), 20)

    def test_sample_grids_are_valid(self):
        pairs = support(BATTLESHIP)
        for x, y in BATTLESHIP_GRIDS:
            self.assertIn((x, y), pairs)

    def test_postconditions(self):
        dataset = gen_battleship(TaskSpec(BATTLESHIP, train_size=10_000, test_size=1))
        for example in dataset.train:
            self.assertEqual(len(example.x), 25)
            self.assertEqual(example.x.count("1"), 1)
            ship = tuple(i for i, label in enumerate(example.y) if label == "A")
            self.assertIn(ship, SHIP_PLACEMENTS)
            self.assertEqual(example.y[example.x.index("1")], "A")

    def test_placements_are_uniform(self):
        dataset = gen_battleship(TaskSpec(BATTLESHIP, train_size=20_000, test_size=1))
        counts = Counter(example.y for example in dataset.train)
        self.assertEqual(len(counts), 20)
        for ship, count in counts.items():
            self.assertAlmostEqual(count / 20_000, 1 / 20, delta=0.01, msg=ship)

    def test_render_grid(self):
        x, y = BATTLESHIP_GRIDS[1]
        self.assertEqual(render_grid(y), "_____\n_____\nAAAA_\n_____\n_____")
        with self.assertRaises(DataFormatError):
            render_grid(x[:24])


class DeterminismTests(SimpleTestCase):
    def test_same_seed_same_examples(self):
        spec = TaskSpec(AGREEMENT, train_size=50, test_size=20)
        first, second = generate(spec), generate(spec)
        self.assertEqual(first.train, second.train)
        self.assertEqual(first.test, second.test)

    def test_prefix_does_not_depend_on_size(self):
        small = generate(TaskSpec(CARDINALITY, train_size=5, test_size=1))
        large = generate(TaskSpec(CARDINALITY, train_size=50, test_size=1))
        self.assertEqual(small.train, large.train[:5])

    def test_seed_and_split_change_the_stream(self):
        one = generate(TaskSpec(CARDINALITY, train_size=30, test_size=30, seed=1))
        two = generate(TaskSpec(CARDINALITY, train_size=30, test_size=30, seed=2))
        self.assertNotEqual(one.train, two.train)
        self.assertNotEqual(one.train, one.test)


class OptimalAccuracyTests(SimpleTestCase):
    def test_exact_values(self):
        self.assertEqual(optimal_accuracy(CARDINALITY), Fraction(83, 567))
        self.assertEqual(optimal_accuracy(AGREEMENT), Fraction(1, 6))
        self.assertEqual(optimal_accuracy(BATTLESHIP), Fraction(5, 16))
        self.assertEqual(round(float(optimal_accuracy(CARDINALITY)) * 100, 2), 14.64)

    def test_joint_distributions_are_normalized(self):
        for task in TASKS:
            self.assertEqual(sum(p for _, _, p in joint_distribution(task)), 1, msg=task)

    def test_unknown_task(self):
        with self.assertRaises(DataFormatError):
            optimal_accuracy("ner")
        with self.assertRaises(DataFormatError):
            expected_accuracy("ner", str)

    def test_expected_accuracy_of_the_optimal_predictor(self):
        for task in TASKS:
            best = {}
            for x, y, probability in joint_distribution(task):
                if probability > best.get(x, ("", 0))[1]:
                    best[x] = (y, probability)
            self.assertEqual(expected_accuracy(task, lambda x: best[x][0]), optimal_accuracy(task), msg=task)

    def test_any_valid_agreement_choice_scores_one_sixth(self):
        def always_ab(x):
            labels = iter("AB")
            return "".join(next(labels) if token == "1" else "_" for token in x)

        self.assertEqual(expected_accuracy(AGREEMENT, always_ab), Fraction(1, 6))
        self.assertEqual(expected_accuracy(AGREEMENT, lambda x: "_" * len(x)), 0)

    def test_expected_accuracy_decodes_each_input_once(self):
        calls = Counter()

        def predict(x):
            calls[x] += 1
            return "_" * len(x)

        expected_accuracy(BATTLESHIP, predict)
        self.assertEqual(len(calls), 25)
        self.assertEqual(set(calls.values()), {1})


class AccuracyTests(SimpleTestCase):
    def test_exact_match(self):
        golds = ["_A_", "AA_", "___", "A__"]
        self.assertEqual(exact_match_accuracy(golds, golds), 1.0)
        self.assertEqual(exact_match_accuracy(["_A_", "AA_", "__A", "___"], golds), 0.5)
        self.assertEqual(exact_match_accuracy(["_AA"], ["_A_"]), 0.0)

    def test_token_accuracy_gives_partial_credit(self):
        self.assertAlmostEqual(token_accuracy(["_AA"], ["_A_"]), 2 / 3)

    def test_misaligned_inputs(self):
        with self.assertRaises(DataFormatError):
            exact_match_accuracy(["_A"], ["_A", "__"])
        with self.assertRaises(DataFormatError):
            exact_match_accuracy(["_A"], ["_A_"])
        with self.assertRaises(DataFormatError):
            exact_match_accuracy([], [])


class PatternFileTests(SimpleTestCase):
    def test_task_patterns(self):
        self.assertEqual(len(task_patterns(CARDINALITY)), 9)
        self.assertEqual(task_patterns(CARDINALITY)[2], "^(_*A){3}_*$")
        self.assertEqual(len(task_patterns(AGREEMENT)), 15)
        self.assertEqual(task_patterns(BATTLESHIP), ["A____A"])

    def test_standard_and_baseline_files_parse(self):
        for task in TASKS:
            alphabet, patterns = parse_pattern_file(standard_patterns(task))
            self.assertEqual(patterns, task_patterns(task))
            baseline_alphabet, none = parse_pattern_file(baseline_patterns(task))
            self.assertEqual(baseline_alphabet, alphabet)
            self.assertEqual(none, [])


class DatasetFileTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def path(self, name):
        return os.path.join(self.directory.name, name)

    def test_files_are_byte_identical(self):
        spec = TaskSpec(BATTLESHIP, train_size=40, test_size=10)
        for name in ("data.jsonl", "data.jsonl.gz"):
            for copy in ("a", "b"):
                write_dataset(self.path(copy + name), generate(spec).train, header=spec.header("train"))
            with open(self.path("a" + name), "rb") as a, open(self.path("b" + name), "rb") as b:
                self.assertEqual(a.read(), b.read())

    def test_header_and_examples_read_back(self):
        spec = TaskSpec(AGREEMENT, train_size=12, test_size=3)
        dataset = generate(spec)
        write_dataset(self.path("test.jsonl.gz"), dataset.test, header=spec.header("test"))
        with gzip.open(self.path("test.jsonl.gz"), "rt", encoding="utf-8") as handle:
            self.assertTrue(handle.readline().startswith('{"header":'))
        header, examples = read_dataset(self.path("test.jsonl.gz"), Alphabet.from_declaration("_ABCDEF"))
        self.assertEqual(header, {"task": AGREEMENT, "seed": 2, "size": 3, "split": "test"})
        self.assertEqual(examples, dataset.test)

    def test_headerless_file(self):
        write_dataset(self.path("plain.jsonl"), [Example("01", "_A")])
        self.assertEqual(read_dataset(self.path("plain.jsonl")), (None, [Example("01", "_A")]))

    def write_lines(self, name, *lines):
        with open(self.path(name), "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
        return self.path(name)

    def test_malformed_files(self):
        cases = {
            "missing.jsonl": ['{"x": "01"}'],
            "lengths.jsonl": ['{"x": "01", "y": "_"}'],
            "json.jsonl": ['{"x": "01", "y": "_A"', ],
            "empty.jsonl": ['{"header": {"task": "cardinality"}}'],
            "labels.jsonl": ['{"x": "01", "y": "_Z"}'],
        }
        for name, lines in cases.items():
            with self.subTest(name=name):
                with self.assertRaises(DataFormatError):
                    read_dataset(self.write_lines(name, *lines), Alphabet.from_declaration("_A"))

    def test_size_mismatch_warns(self):
        path = self.write_lines("short.jsonl", '{"header": {"size": 5}}', '{"x": "0", "y": "_"}')
        with self.assertLogs("rpcrf.synthdata", level="WARNING"):
            read_dataset(path)
