"""
Synthetic sequence-labeling tasks with known optimal accuracy

cardinality: x is a digit k then nine zeros, y has exactly k `A`s after a
    leading `_`.
agreement: x has exactly two ones; their labels form one of the pairs A/B,
    C/D or E/F in either order.
battleship: a 4x1 ship on a 5x5 grid (row-major); x marks one ship cell,
    y marks all four.

Each example is drawn from its own PCG64 stream seeded by (seed, split, index),
so generation is reproducible and independent of dataset size.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .crf import Example
from .exceptions import DataFormatError
from .patterns import Alphabet, render_pattern_file
from .storage import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

CARDINALITY = "cardinality"
AGREEMENT = "agreement"
BATTLESHIP = "battleship"
TASKS = (CARDINALITY, AGREEMENT, BATTLESHIP)

DEFAULT_TRAIN_SIZE = 10_000
DEFAULT_TEST_SIZE = 2_000
DEFAULT_SEEDS = {CARDINALITY: 1, AGREEMENT: 2, BATTLESHIP: 3}

TRAIN_SPLIT = "train"
TEST_SPLIT = "test"
SPLIT_STREAMS = {TRAIN_SPLIT: 0, TEST_SPLIT: 1}

CARDINALITY_LENGTH = 10
AGREEMENT_LENGTH = 10
AGREEMENT_PAIRS = (("A", "B"), ("C", "D"), ("E", "F"))
GRID_WIDTH = 5
SHIP_LENGTH = 4

TASK_ALPHABETS = {
    CARDINALITY: "_A",
    AGREEMENT: "_ABCDEF",
    BATTLESHIP: "_A",
}


def _placements() -> Tuple[Tuple[int, ...], ...]:
    cells = []
    for row in range(GRID_WIDTH):
        for start in range(GRID_WIDTH - SHIP_LENGTH + 1):
            cells.append(tuple(row * GRID_WIDTH + start + k for k in range(SHIP_LENGTH)))
    for column in range(GRID_WIDTH):
        for start in range(GRID_WIDTH - SHIP_LENGTH + 1):
            cells.append(tuple((start + k) * GRID_WIDTH + column for k in range(SHIP_LENGTH)))
    return tuple(cells)


# 10 horizontal then 10 vertical
SHIP_PLACEMENTS = _placements()


@dataclass(frozen=True)
class TaskSpec:
    task: str
    train_size: int = DEFAULT_TRAIN_SIZE
    test_size: int = DEFAULT_TEST_SIZE
    seed: Optional[int] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataFormatError(f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")
        if self.train_size < 1 or self.test_size < 1:
            raise DataFormatError("dataset sizes must be at least 1")
        if self.seed is None:
            object.__setattr__(self, "seed", DEFAULT_SEEDS[self.task])
        if not 0 <= self.seed < 2 ** 64:
            raise DataFormatError("seed must be a 64-bit unsigned integer")

    def size(self, split: str) -> int:
        return self.train_size if split == TRAIN_SPLIT else self.test_size

    def header(self, split: str) -> Dict:
        return {"task": self.task, "seed": self.seed, "size": self.size(split), "split": split}


@dataclass
class Dataset:
    spec: TaskSpec
    train: List[Example] = field(default_factory=list)
    test: List[Example] = field(default_factory=list)

    def split(self, name: str) -> List[Example]:
        return self.train if name == TRAIN_SPLIT else self.test


def example_rng(seed: int, split: str, index: int) -> np.random.Generator:
    """Independent generator for one example"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, SPLIT_STREAMS[split], index])))


def sample_cardinality(rng: np.random.Generator) -> Example:
    k = int(rng.integers(1, CARDINALITY_LENGTH))
    chosen = set(int(p) for p in rng.choice(CARDINALITY_LENGTH - 1, size=k, replace=False))
    y = "_" + "".join("A" if p in chosen else "_" for p in range(CARDINALITY_LENGTH - 1))
    return Example(x=str(k) + "0" * (CARDINALITY_LENGTH - 1), y=y)


def sample_agreement(rng: np.random.Generator) -> Example:
    first, second = sorted(int(p) for p in rng.choice(AGREEMENT_LENGTH, size=2, replace=False))
    choice = int(rng.integers(2 * len(AGREEMENT_PAIRS)))
    pair = AGREEMENT_PAIRS[choice // 2]
    left, right = pair if choice % 2 == 0 else pair[::-1]
    x = ["0"] * AGREEMENT_LENGTH
    y = ["_"] * AGREEMENT_LENGTH
    x[first] = x[second] = "1"
    y[first], y[second] = left, right
    return Example(x="".join(x), y="".join(y))


def sample_battleship(rng: np.random.Generator) -> Example:
    ship = SHIP_PLACEMENTS[int(rng.integers(len(SHIP_PLACEMENTS)))]
    hit = ship[int(rng.integers(SHIP_LENGTH))]
    cells = GRID_WIDTH * GRID_WIDTH
    x = "".join("1" if cell == hit else "0" for cell in range(cells))
    y = "".join("A" if cell in ship else "_" for cell in range(cells))
    return Example(x=x, y=y)


SAMPLERS: Dict[str, Callable[[np.random.Generator], Example]] = {
    CARDINALITY: sample_cardinality,
    AGREEMENT: sample_agreement,
    BATTLESHIP: sample_battleship,
}


def _generate(spec: TaskSpec, expected_task: str) -> Dataset:
    if spec.task != expected_task:
        raise DataFormatError(f"task spec is for {spec.task!r}, not {expected_task!r}")
    sampler = SAMPLERS[spec.task]
    dataset = Dataset(spec=spec)
    for split in (TRAIN_SPLIT, TEST_SPLIT):
        dataset.split(split).extend(sampler(example_rng(spec.seed, split, index))
                                    for index in range(spec.size(split)))
    logger.info(f"Generated {spec.task} data: {len(dataset.train)} train, {len(dataset.test)} test "
                f"(seed {spec.seed})")
    return dataset


def gen_cardinality(spec: TaskSpec) -> Dataset:
    return _generate(spec, CARDINALITY)


def gen_agreement(spec: TaskSpec) -> Dataset:
    return _generate(spec, AGREEMENT)


def gen_battleship(spec: TaskSpec) -> Dataset:
    return _generate(spec, BATTLESHIP)


def generate(spec: TaskSpec) -> Dataset:
    return {CARDINALITY: gen_cardinality, AGREEMENT: gen_agreement, BATTLESHIP: gen_battleship}[spec.task](spec)


def joint_distribution(task: str) -> Iterator[Tuple[str, str, Fraction]]:
    """Every (x, y) the generator can produce, with its exact probability"""
    if task == CARDINALITY:
        for k in range(1, CARDINALITY_LENGTH):
            subsets = comb(CARDINALITY_LENGTH - 1, k)
            probability = Fraction(1, CARDINALITY_LENGTH - 1) / subsets
            x = str(k) + "0" * (CARDINALITY_LENGTH - 1)
            for mask in range(1 << (CARDINALITY_LENGTH - 1)):
                if bin(mask).count("1") == k:
                    y = "_" + "".join("A" if mask >> p & 1 else "_" for p in range(CARDINALITY_LENGTH - 1))
                    yield x, y, probability
    elif task == AGREEMENT:
        positions = comb(AGREEMENT_LENGTH, 2)
        probability = Fraction(1, positions * 2 * len(AGREEMENT_PAIRS))
        for first in range(AGREEMENT_LENGTH):
            for second in range(first + 1, AGREEMENT_LENGTH):
                x = "".join("1" if p in (first, second) else "0" for p in range(AGREEMENT_LENGTH))
                for pair in AGREEMENT_PAIRS:
                    for left, right in (pair, pair[::-1]):
                        y = ["_"] * AGREEMENT_LENGTH
                        y[first], y[second] = left, right
                        yield x, "".join(y), probability
    elif task == BATTLESHIP:
        probability = Fraction(1, len(SHIP_PLACEMENTS) * SHIP_LENGTH)
        cells = GRID_WIDTH * GRID_WIDTH
        for ship in SHIP_PLACEMENTS:
            y = "".join("A" if cell in ship else "_" for cell in range(cells))
            for hit in ship:
                yield "".join("1" if cell == hit else "0" for cell in range(cells)), y, probability
    else:
        raise DataFormatError(f"unknown task {task!r}")


def optimal_accuracy(task: str) -> Fraction:
    """
    Exact-match accuracy of the Bayes-optimal predictor

    Sums, over inputs, the probability of the most likely label sequence
    jointly with that input.
    """
    best: Dict[str, Fraction] = {}
    for x, _, probability in joint_distribution(task):
        best[x] = max(best.get(x, Fraction(0)), probability)
    return sum(best.values(), Fraction(0))


def expected_accuracy(task: str, predict: Callable[[str], str]) -> Fraction:
    """
    Exact-match accuracy of a predictor over the task's whole distribution

    Free of the sampling noise of a finite test split; `predict` is called
    once per distinct input.
    """
    predictions: Dict[str, str] = {}
    total = Fraction(0)
    for x, y, probability in joint_distribution(task):
        if x not in predictions:
            predictions[x] = predict(x)
        if predictions[x] == y:
            total += probability
    return total


def _check_aligned(predictions: Sequence[str], golds: Sequence[str]):
    if len(predictions) != len(golds):
        raise DataFormatError(f"{len(predictions)} predictions for {len(golds)} gold sequences")
    if not golds:
        raise DataFormatError("cannot score an empty set of sequences")
    for index, (predicted, gold) in enumerate(zip(predictions, golds)):
        if len(predicted) != len(gold):
            raise DataFormatError(f"sequence {index}: predicted length {len(predicted)}, gold length {len(gold)}")


def exact_match_accuracy(predictions: Sequence[str], golds: Sequence[str]) -> float:
    """Fraction of sequences predicted correctly at every position"""
    _check_aligned(predictions, golds)
    return sum(1 for p, g in zip(predictions, golds) if p == g) / len(golds)


def token_accuracy(predictions: Sequence[str], golds: Sequence[str]) -> float:
    _check_aligned(predictions, golds)
    correct = sum(a == b for p, g in zip(predictions, golds) for a, b in zip(p, g))
    return correct / sum(len(g) for g in golds)


def render_grid(sequence: str, width: int = GRID_WIDTH) -> str:
    if width < 1 or len(sequence) % width:
        raise DataFormatError(f"a sequence of length {len(sequence)} does not fill rows of width {width}")
    return "\n".join(sequence[start:start + width] for start in range(0, len(sequence), width))


def task_patterns(task: str) -> List[str]:
    if task == CARDINALITY:
        return [f"^(_*A){{{k}}}_*$" for k in range(1, CARDINALITY_LENGTH)]
    if task == AGREEMENT:
        letters = "".join(letter for pair in AGREEMENT_PAIRS for letter in pair)
        return [f"^_*({a}_*{b}|{b}_*{a})_*$"
                for i, a in enumerate(letters) for b in letters[i + 1:]]
    if task == BATTLESHIP:
        return ["A" + "_" * (GRID_WIDTH - 1) + "A"]
    raise DataFormatError(f"unknown task {task!r}")


def standard_patterns(task: str) -> str:
    """Pattern file text used for the task's pattern CRF"""
    patterns = task_patterns(task)
    return render_pattern_file(Alphabet.from_declaration(TASK_ALPHABETS[task]), patterns,
                               comment=f"{task}: {len(patterns)} patterns")


def baseline_patterns(task: str) -> str:
    """Alphabet-only pattern file: the plain linear-chain CRF"""
    if task not in TASKS:
        raise DataFormatError(f"unknown task {task!r}")
    return render_pattern_file(Alphabet.from_declaration(TASK_ALPHABETS[task]), [],
                               comment=f"{task}: linear-chain baseline")


def write_dataset(path: Union[str, Path], examples: Sequence[Example], header: Optional[Dict] = None):
    write_jsonl(path, ({"x": e.x, "y": e.y} for e in examples), header=header)
    logger.info(f"Wrote {len(examples)} examples to {path}")


def read_dataset(path: Union[str, Path], alphabet: Optional[Alphabet] = None) -> Tuple[Optional[Dict], List[Example]]:
    """
    Read a JSONL dataset

    Args:
        path: Dataset file, optionally gzipped
        alphabet: When given, every label must belong to it

    Returns:
        Tuple of (header or None, examples)
    """
    header, records = read_jsonl(path)
    examples = []
    for number, record in enumerate(records, start=1):
        x, y = record.get("x"), record.get("y")
        if not isinstance(x, str) or not isinstance(y, str):
            raise DataFormatError(f"{path}: record {number} needs string fields 'x' and 'y'")
        try:
            example = Example(x=x, y=y)
        except DataFormatError as e:
            raise DataFormatError(f"{path}: record {number}: {e}") from e
        if alphabet is not None:
            unknown = sorted(set(y) - set(alphabet.symbols))
            if unknown:
                raise DataFormatError(f"{path}: record {number} uses labels {''.join(unknown)!r} "
                                      f"outside the alphabet {alphabet.declaration()!r}")
        examples.append(example)
    if not examples:
        raise DataFormatError(f"{path}: no examples")
    if header and header.get("size") not in (None, len(examples)):
        logger.warning(f"{path}: header says {header['size']} examples, found {len(examples)}")
    return header, examples
