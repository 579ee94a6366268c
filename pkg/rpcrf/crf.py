"""
Exact inference and training for the pattern CRF

The distribution over label sequences is computed as a linear-chain CRF whose
labels are the arcs of the pattern machine. A Lattice holds, per position,
the log-value of every arc; the zero-probability cases (a first arc that does
not leave the initial state, consecutive arcs that do not chain) are kept as a
structural live mask and never enter a sum as -inf.
"""
import logging
import time
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .automata import match_end_positions
from .exceptions import DataFormatError, NumericDivergenceError
from .pattern_machine import LabeledProductDfa, PatternSet, fired_patterns
from .potentials import (TRANSITION, FeatureConfig, FeatureIndex, FeatureKey, ModelParams,
                         emission_features, log_emission, log_pattern, log_transition,
                         pattern_features)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Example:
    x: str
    y: str

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise DataFormatError(f"input and label lengths differ ({len(self.x)} vs {len(self.y)})")
        if not self.x:
            raise DataFormatError("examples must have at least one position")
        if "|" in self.x:
            raise DataFormatError("input tokens may not contain '|'")


@dataclass
class Lattice:
    """
    Per-position arc log-values for one input

    Positions are 0-based rows here; row i holds position i + 1.
    `arc_scores` is finite everywhere; only entries with `live` set are
    part of any path.
    """
    length: int
    arc_scores: np.ndarray
    live: np.ndarray
    transition: np.ndarray
    machine: LabeledProductDfa = field(repr=False)

    def value(self, position: int, arc_id: int) -> Optional[float]:
        """Log-value of an arc at a 1-based position, None when masked dead"""
        if not self.live[position - 1, arc_id]:
            return None
        return float(self.arc_scores[position - 1, arc_id])


def _incoming_arcs(machine: LabeledProductDfa) -> Tuple[np.ndarray, np.ndarray]:
    """Padded per-state list of incoming arc ids, ascending, and its validity mask"""
    cached = getattr(machine, "_incoming", None)
    if cached is not None:
        return cached
    incoming: List[List[int]] = [[] for _ in range(machine.state_count)]
    for arc in machine.arcs:
        incoming[arc.target].append(arc.arc_id)
    width = max(1, max(len(arcs) for arcs in incoming))
    table = np.zeros((machine.state_count, width), dtype=np.int64)
    valid = np.zeros((machine.state_count, width), dtype=bool)
    for state, arcs in enumerate(incoming):
        table[state, :len(arcs)] = arcs
        valid[state, :len(arcs)] = True
    object.__setattr__(machine, "_incoming", (table, valid))
    return table, valid


def _masked_logsumexp(values: np.ndarray, mask: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Log-sum-exp over the masked-in entries only

    Returns (result, any_live); rows with nothing live get 0.0 in result and
    False in any_live.
    """
    mask = np.broadcast_to(mask, values.shape)
    any_live = mask.any(axis=axis)
    peak = np.max(values, axis=axis, where=mask, initial=-np.inf, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    shifted = np.where(mask, values - peak, 0.0)
    total = np.sum(np.exp(shifted), axis=axis, where=mask)
    result = np.squeeze(peak, axis=axis) + np.log(np.where(any_live, total, 1.0))
    return np.where(any_live, result, 0.0), any_live


def build_lattice(machine: LabeledProductDfa, params: ModelParams, config: FeatureConfig,
                  x: Sequence[str]) -> Lattice:
    """
    Arc log-values: emission of the arc symbol plus the pattern potentials of
    every pattern labeling the arc target (end-anchored ones only at i = N)
    """
    length = len(x)
    if length < 1:
        raise DataFormatError("cannot build a lattice for an empty input")
    symbols = machine.alphabet.symbols
    emissions = np.array([[log_emission(params, config, x, label, i) for label in symbols]
                          for i in range(1, length + 1)]).reshape(length, len(symbols))
    arc_scores = emissions[:, machine.arc_symbols]
    if machine.pattern_count:
        pattern_scores = np.array([[log_pattern(params, config, x, pid, i) for pid in range(machine.pattern_count)]
                                   for i in range(1, length + 1)])
        fire = np.array([machine.firing_mask(i, length) for i in range(1, length + 1)])
        state_scores = (pattern_scores * fire) @ machine.label_matrix.T.astype(np.float64)
        arc_scores = arc_scores + state_scores[:, machine.arc_targets]

    live = np.zeros((length, machine.arc_count), dtype=bool)
    reached = np.zeros(machine.state_count, dtype=bool)
    reached[machine.initial] = True
    for i in range(length):
        live[i] = reached[machine.arc_sources]
        reached = np.zeros(machine.state_count, dtype=bool)
        reached[machine.arc_targets[live[i]]] = True
    return Lattice(length=length, arc_scores=arc_scores, live=live,
                   transition=params.transition.copy(), machine=machine)


def _forward(lattice: Lattice) -> np.ndarray:
    machine = lattice.machine
    incoming, valid = _incoming_arcs(machine)
    symbols = machine.arc_symbols
    alpha = np.zeros_like(lattice.arc_scores)
    alpha[0] = np.where(lattice.live[0], lattice.arc_scores[0], 0.0)
    for i in range(1, lattice.length):
        mask = valid & lattice.live[i - 1][incoming]
        # per state s and next symbol b: logsumexp over live incoming arcs p
        values = alpha[i - 1][incoming][:, :, None] + lattice.transition[symbols[incoming]]
        gathered, _ = _masked_logsumexp(values, mask[:, :, None], axis=1)
        chained = gathered[machine.arc_sources, symbols]
        alpha[i] = np.where(lattice.live[i], lattice.arc_scores[i] + chained, 0.0)
    return alpha


def _backward(lattice: Lattice) -> np.ndarray:
    machine = lattice.machine
    width = machine.alphabet.size
    beta = np.zeros_like(lattice.arc_scores)
    for i in range(lattice.length - 2, -1, -1):
        ahead = (lattice.arc_scores[i + 1] + beta[i + 1]).reshape(machine.state_count, width)
        # every arc leaving the target of a live arc is live at the next position
        values = lattice.transition[machine.arc_symbols] + ahead[machine.arc_targets]
        beta[i] = logsumexp(values, axis=1)
    return beta


def log_partition(lattice: Lattice) -> float:
    """log Z by the forward recursion over live arcs"""
    alpha = _forward(lattice)
    return float(logsumexp(alpha[-1][lattice.live[-1]]))


def path_score(lattice: Lattice, path: Sequence[int]) -> float:
    """Unnormalized log-score of an arc path; dead or unchained paths are rejected"""
    machine = lattice.machine
    if len(path) != lattice.length:
        raise ValueError("path length differs from the lattice length")
    total = 0.0
    for i, arc_id in enumerate(path):
        if not lattice.live[i, arc_id]:
            raise ValueError(f"arc {arc_id} is not live at position {i + 1}")
        total += lattice.arc_scores[i, arc_id]
        if i:
            previous = machine.arcs[path[i - 1]]
            if previous.target != machine.arcs[arc_id].source:
                raise ValueError(f"arcs at positions {i} and {i + 1} do not chain")
            total += lattice.transition[previous.symbol, machine.arcs[arc_id].symbol]
    return float(total)


def viterbi(lattice: Lattice, machine: LabeledProductDfa) -> str:
    """
    Best-scoring label sequence

    Ties go to the lower arc id at every backpointer decision and at the final
    position.
    """
    incoming, valid = _incoming_arcs(machine)
    symbols = machine.arc_symbols
    delta = np.where(lattice.live[0], lattice.arc_scores[0], -np.inf)
    backpointers = np.zeros((lattice.length, machine.arc_count), dtype=np.int64)
    for i in range(1, lattice.length):
        mask = valid & lattice.live[i - 1][incoming]
        values = np.where(mask[:, :, None],
                          delta[incoming][:, :, None] + lattice.transition[symbols[incoming]], -np.inf)
        best = np.argmax(values, axis=1)
        best_arc = np.take_along_axis(incoming, best, axis=1)
        best_value = np.take_along_axis(values, best[:, None, :], axis=1)[:, 0, :]
        backpointers[i] = best_arc[machine.arc_sources, symbols]
        delta = np.where(lattice.live[i],
                         lattice.arc_scores[i] + best_value[machine.arc_sources, symbols], -np.inf)
    arc_id = int(np.argmax(delta))
    path = [arc_id]
    for i in range(lattice.length - 1, 0, -1):
        arc_id = int(backpointers[i, arc_id])
        path.append(arc_id)
    path.reverse()
    return machine.alphabet.decode([machine.arcs[a].symbol for a in path])


def decode(machine: LabeledProductDfa, params: ModelParams, config: FeatureConfig, x: Sequence[str]) -> str:
    return viterbi(build_lattice(machine, params, config, x), machine)


@dataclass
class Posteriors:
    log_z: float
    arcs: np.ndarray
    transitions: np.ndarray


def arc_posteriors(lattice: Lattice) -> Posteriors:
    """Forward-backward arc marginals and expected label-transition counts"""
    machine = lattice.machine
    width = machine.alphabet.size
    alpha = _forward(lattice)
    beta = _backward(lattice)
    log_z = float(logsumexp(alpha[-1][lattice.live[-1]]))
    marginals = np.zeros_like(lattice.arc_scores)
    marginals[lattice.live] = np.exp(alpha[lattice.live] + beta[lattice.live] - log_z)

    transitions = np.zeros((width, width))
    for i in range(1, lattice.length):
        previous = np.flatnonzero(lattice.live[i - 1])
        following = machine.arc_targets[previous][:, None] * width + np.arange(width)
        values = (alpha[i - 1, previous][:, None]
                  + lattice.transition[machine.arc_symbols[previous]]
                  + lattice.arc_scores[i, following] + beta[i, following] - log_z)
        rows = np.broadcast_to(machine.arc_symbols[previous][:, None], values.shape)
        columns = np.broadcast_to(np.arange(width), values.shape)
        np.add.at(transitions, (rows, columns), np.exp(values))
    return Posteriors(log_z=log_z, arcs=marginals, transitions=transitions)


def posterior_marginals(lattice: Lattice) -> np.ndarray:
    """Per-position label marginals, shape (N, |Σ|)"""
    machine = lattice.machine
    posteriors = arc_posteriors(lattice)
    return posteriors.arcs.reshape(lattice.length, machine.state_count, machine.alphabet.size).sum(axis=1)


def _add(counts: Dict[FeatureKey, float], key: FeatureKey, value: float):
    counts[key] = counts.get(key, 0.0) + value


def expected_feature_counts(lattice: Lattice, machine: LabeledProductDfa, params: ModelParams,
                            config: FeatureConfig, x: Sequence[str],
                            posteriors: Optional[Posteriors] = None) -> Dict[FeatureKey, float]:
    """
    Model expectation of every feature count under P(y | x)

    Args:
        posteriors: Precomputed arc posteriors of this lattice, if available
    """
    posteriors = posteriors or arc_posteriors(lattice)
    symbols = machine.alphabet.symbols
    length = lattice.length
    counts: Dict[FeatureKey, float] = {}

    label_marginals = posteriors.arcs.reshape(length, machine.state_count, len(symbols)).sum(axis=1)
    for i in range(1, length + 1):
        for label_id, label in enumerate(symbols):
            weight = float(label_marginals[i - 1, label_id])
            if weight:
                for key in emission_features(config, x, label, i):
                    _add(counts, key, weight)

    if machine.pattern_count:
        occupancy = np.zeros((length, machine.state_count))
        for i in range(length):
            np.add.at(occupancy[i], machine.arc_targets, posteriors.arcs[i])
        firing = occupancy @ machine.label_matrix.astype(np.float64)
        for i in range(1, length + 1):
            fire = machine.firing_mask(i, length)
            for pattern_id in range(machine.pattern_count):
                weight = float(firing[i - 1, pattern_id]) if fire[pattern_id] else 0.0
                if weight:
                    for key in pattern_features(config, x, pattern_id, i):
                        _add(counts, key, weight)

    for a_id, a in enumerate(symbols):
        for b_id, b in enumerate(symbols):
            weight = float(posteriors.transitions[a_id, b_id])
            if weight:
                _add(counts, (TRANSITION, a, b), weight)
    return counts


def sequence_features(machine: LabeledProductDfa, config: FeatureConfig, x: Sequence[str],
                      y: Sequence[str]) -> Dict[FeatureKey, float]:
    """Feature counts of one labeled sequence"""
    counts: Dict[FeatureKey, float] = {}
    for i, label in enumerate(y, start=1):
        for key in emission_features(config, x, label, i):
            _add(counts, key, 1.0)
    for a, b in zip(y, y[1:]):
        _add(counts, (TRANSITION, a, b), 1.0)
    for i, fired in enumerate(fired_patterns(machine, y), start=1):
        for pattern_id in fired:
            for key in pattern_features(config, x, pattern_id, i):
                _add(counts, key, 1.0)
    return counts


def score_sequence(patterns: PatternSet, params: ModelParams, config: FeatureConfig,
                   x: Sequence[str], y: Sequence[str]) -> float:
    """
    Unnormalized log-score of y straight from the pattern CRF definition

    Runs each pattern's own automaton over y; the product machine is not used.
    """
    if len(x) != len(y):
        raise DataFormatError(f"input and label lengths differ ({len(x)} vs {len(y)})")
    score = sum(log_emission(params, config, x, label, i) for i, label in enumerate(y, start=1))
    score += sum(log_transition(params, a, b) for a, b in zip(y, y[1:]))
    for pattern in patterns.patterns:
        for i in match_end_positions(pattern.dfa, pattern.anchored_end, y, patterns.alphabet):
            score += log_pattern(params, config, x, pattern.pattern_id, i)
    return float(score)


def _group_inputs(batch: Sequence[Example]) -> "OrderedDict[str, int]":
    grouped: "OrderedDict[str, int]" = OrderedDict()
    for example in batch:
        grouped[example.x] = grouped.get(example.x, 0) + 1
    return grouped


def nll_and_gradient(machine: LabeledProductDfa, params: ModelParams, config: FeatureConfig,
                     batch: Sequence[Example], l2: float = 0.0) -> Tuple[float, Dict[FeatureKey, float]]:
    """
    Regularized negative log-likelihood and its gradient

    Objective is Σ (log Z(x) − score(x, y)) + (l2 / 2)·‖θ‖², so the gradient is
    expected − observed feature counts + l2·θ. Examples sharing an input share
    one lattice.
    """
    if not batch:
        raise ValueError("batch must not be empty")
    observed: Dict[FeatureKey, float] = {}
    for example in batch:
        for key, value in sequence_features(machine, config, example.x, example.y).items():
            _add(observed, key, value)
    objective = -params.dot(observed)
    gradient: Dict[FeatureKey, float] = {key: -value for key, value in observed.items()}
    for x, count in _group_inputs(batch).items():
        lattice = build_lattice(machine, params, config, x)
        posteriors = arc_posteriors(lattice)
        objective += count * posteriors.log_z
        for key, value in expected_feature_counts(lattice, machine, params, config, x, posteriors).items():
            _add(gradient, key, count * value)
    if l2:
        objective += 0.5 * l2 * params.squared_norm()
        for key, value in params.items():
            if value:
                _add(gradient, key, l2 * value)
    return float(objective), gradient


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 500
    tolerance: float = 1e-6
    l2: float = 1e-4
    batch_size: Optional[int] = None
    shuffle_seed: int = 0
    init_scale: float = 0.0
    init_seed: int = 0
    log_every: int = 25


@dataclass
class TrainingResult:
    params: ModelParams
    config: FeatureConfig
    nll_trace: List[float]
    epochs: int
    converged: bool
    wall_clock: float

    @property
    def final_nll(self) -> float:
        return self.nll_trace[-1]


class _Objective:
    """Objective over a flat parameter vector with observed counts cached per example"""

    def __init__(self, machine: LabeledProductDfa, config: FeatureConfig, index: FeatureIndex, l2: float):
        self.machine = machine
        self.config = config
        self.index = index
        self.l2 = l2
        self._observed: Dict[Example, np.ndarray] = {}

    def observed(self, batch: Sequence[Example]) -> np.ndarray:
        total = np.zeros(len(self.index))
        for example, count in Counter(batch).items():
            if example not in self._observed:
                self._observed[example] = self.index.vector(
                    sequence_features(self.machine, self.config, example.x, example.y))
            total += count * self._observed[example]
        return total

    def __call__(self, theta: np.ndarray, batch: Sequence[Example]) -> Tuple[float, np.ndarray]:
        machine = self.machine
        params = ModelParams.from_vector(self.index, theta, machine.alphabet, machine.pattern_count)
        observed = self.observed(batch)
        objective = -float(theta @ observed)
        gradient = -observed
        for x, count in _group_inputs(batch).items():
            lattice = build_lattice(machine, params, self.config, x)
            posteriors = arc_posteriors(lattice)
            objective += count * posteriors.log_z
            expected = expected_feature_counts(lattice, machine, params, self.config, x, posteriors)
            gradient = gradient + count * self.index.vector(expected)
        objective += 0.5 * self.l2 * float(theta @ theta)
        gradient = gradient + self.l2 * theta
        return objective, gradient


def train(machine: LabeledProductDfa, config: FeatureConfig, dataset: Sequence[Example],
          train_config: Optional[TrainConfig] = None) -> TrainingResult:
    """
    Fit the weights with Adam on the regularized negative log-likelihood

    Args:
        machine: Pattern machine (the one-state machine for a plain CRF)
        config: Feature templates; n_max is filled from the data when unset
        dataset: Training examples
        train_config: Optimizer settings; full batch unless batch_size is set

    Returns:
        TrainingResult with the final weights and the per-epoch objective trace
    """
    if not dataset:
        raise ValueError("dataset must not be empty")
    train_config = train_config or TrainConfig()
    started = time.monotonic()
    if config.n_max is None and config.pattern_position_buckets is None:
        config = config.with_n_max(max(len(example.x) for example in dataset))
    inputs = list(_group_inputs(dataset))
    index = FeatureIndex.for_inputs(machine.alphabet, machine.pattern_count, config, inputs)
    objective = _Objective(machine, config, index, train_config.l2)
    logger.info(f"Training on {len(dataset)} examples ({len(inputs)} distinct inputs), "
                f"{len(index)} features, {machine.arc_count} arcs")

    theta = np.zeros(len(index))
    if train_config.init_scale:
        init_rng = np.random.default_rng(train_config.init_seed)
        theta = init_rng.uniform(-train_config.init_scale, train_config.init_scale, size=len(index))
    first_moment = np.zeros_like(theta)
    second_moment = np.zeros_like(theta)
    shuffle_rng = np.random.default_rng(train_config.shuffle_seed)
    batch_size = train_config.batch_size
    examples = list(dataset)
    trace: List[float] = []
    converged = False
    warned_rise = False
    step = 0

    def adam_update(theta: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        nonlocal first_moment, second_moment, step
        step += 1
        first_moment = train_config.beta1 * first_moment + (1 - train_config.beta1) * gradient
        second_moment = train_config.beta2 * second_moment + (1 - train_config.beta2) * gradient ** 2
        corrected_first = first_moment / (1 - train_config.beta1 ** step)
        corrected_second = second_moment / (1 - train_config.beta2 ** step)
        return theta - train_config.learning_rate * corrected_first / (np.sqrt(corrected_second)
                                                                       + train_config.epsilon)

    epoch = 0
    for epoch in range(1, train_config.max_epochs + 1):
        if batch_size is None or batch_size >= len(examples):
            value, gradient = objective(theta, examples)
            _check_finite(epoch, value, gradient)
            trace.append(value)
            if len(trace) > 1:
                improvement = trace[-2] - value
                if 0 <= improvement < train_config.tolerance * max(abs(trace[-2]), 1e-12):
                    converged = True
                    break
                if improvement < 0 and epoch > 5 and not warned_rise:
                    logger.warning(f"Objective rose at epoch {epoch}: {trace[-2]:.6f} -> {value:.6f}; "
                                   f"consider a smaller learning rate")
                    warned_rise = True
            theta = adam_update(theta, gradient)
        else:
            order = shuffle_rng.permutation(len(examples))
            epoch_value = 0.0
            for start in range(0, len(examples), batch_size):
                batch = [examples[k] for k in order[start:start + batch_size]]
                value, gradient = objective(theta, batch)
                _check_finite(epoch, value, gradient)
                epoch_value += value
                theta = adam_update(theta, gradient)
            trace.append(epoch_value)
        if train_config.log_every and epoch % train_config.log_every == 0:
            logger.info(f"Epoch {epoch}: objective {trace[-1]:.6f}")

    if not converged:
        value, gradient = objective(theta, examples)
        _check_finite(epoch + 1, value, gradient)
        trace.append(value)
    params = ModelParams.from_vector(index, theta, machine.alphabet, machine.pattern_count)
    elapsed = time.monotonic() - started
    logger.info(f"Training finished after {epoch} epochs (converged={converged}), "
                f"objective {trace[-1]:.6f}, {elapsed:.1f}s")
    return TrainingResult(params=params, config=config, nll_trace=trace, epochs=epoch,
                          converged=converged, wall_clock=elapsed)


def _check_finite(epoch: int, value: float, gradient: np.ndarray):
    if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
        logger.error(f"Non-finite objective at epoch {epoch}")
        raise NumericDivergenceError(epoch, value)
