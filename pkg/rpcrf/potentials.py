"""
Log-linear potentials for emissions, label transitions and pattern firings

Every potential is a sum of weights over active feature keys. Keys are tuples
whose first element names the kind:

    ("emission", offset, token, label)
    ("transition", a, b)
    ("bias", pattern_id)
    ("anchor", pattern_id, position, token)
    ("posbucket", pattern_id, bucket)

and serialize as the `|`-joined string of their fields.
"""
import bisect
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DataFormatError
from .patterns import Alphabet
from .storage import read_json, write_json

logger = logging.getLogger(__name__)

EMISSION = "emission"
TRANSITION = "transition"
BIAS = "bias"
ANCHOR = "anchor"
POSBUCKET = "posbucket"
PATTERN_KINDS = (BIAS, ANCHOR, POSBUCKET)

MAX_WINDOW_RADIUS = 4
MODEL_FORMAT = "rpcrf-model/1"

FeatureKey = Tuple


@dataclass(frozen=True)
class FeatureConfig:
    """
    Feature templates standing in for a neural encoder

    `n_max` is the longest training sequence; positions beyond it share the
    last exact-position bucket. `pattern_position_buckets`, when given, are
    ascending boundaries and bucket(i) counts the boundaries <= i.
    """
    emission_window_radius: int = 1
    global_anchor_positions: Tuple[int, ...] = (1,)
    pattern_position_buckets: Optional[Tuple[int, ...]] = None
    pad_symbol: str = "<pad>"
    n_max: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.emission_window_radius <= MAX_WINDOW_RADIUS:
            raise DataFormatError(f"emission window radius must be in 0..{MAX_WINDOW_RADIUS}")
        if any(p < 1 for p in self.global_anchor_positions):
            raise DataFormatError("anchor positions are 1-based and must be >= 1")
        if self.pattern_position_buckets is not None:
            buckets = list(self.pattern_position_buckets)
            if buckets != sorted(set(buckets)):
                raise DataFormatError("position bucket boundaries must be strictly ascending")
        if "|" in self.pad_symbol:
            raise DataFormatError("pad symbol may not contain '|'")

    def bucket(self, position: int) -> int:
        if self.pattern_position_buckets is not None:
            return bisect.bisect_right(self.pattern_position_buckets, position)
        if self.n_max is not None:
            return min(position, self.n_max)
        return position

    def with_n_max(self, n_max: int) -> "FeatureConfig":
        return replace(self, n_max=n_max)

    def token(self, x: Sequence[str], position: int) -> str:
        """Input token at a 1-based position, or the pad symbol outside x"""
        return x[position - 1] if 1 <= position <= len(x) else self.pad_symbol

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["global_anchor_positions"] = list(self.global_anchor_positions)
        if self.pattern_position_buckets is not None:
            data["pattern_position_buckets"] = list(self.pattern_position_buckets)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "FeatureConfig":
        buckets = data.get("pattern_position_buckets")
        return cls(emission_window_radius=int(data.get("emission_window_radius", 1)),
                   global_anchor_positions=tuple(data.get("global_anchor_positions", (1,))),
                   pattern_position_buckets=tuple(buckets) if buckets is not None else None,
                   pad_symbol=data.get("pad_symbol", "<pad>"),
                   n_max=data.get("n_max"))


def emission_features(config: FeatureConfig, x: Sequence[str], label: str, i: int) -> List[FeatureKey]:
    radius = config.emission_window_radius
    return [(EMISSION, offset, config.token(x, i + offset), label) for offset in range(-radius, radius + 1)]


def transition_features(a: str, b: str) -> List[FeatureKey]:
    return [(TRANSITION, a, b)]


def pattern_features(config: FeatureConfig, x: Sequence[str], pattern_id: int, i: int) -> List[FeatureKey]:
    keys: List[FeatureKey] = [(BIAS, pattern_id)]
    keys.extend((ANCHOR, pattern_id, p, config.token(x, p)) for p in config.global_anchor_positions)
    keys.append((POSBUCKET, pattern_id, config.bucket(i)))
    return keys


def active_features(kind: str, *args) -> List[Tuple[FeatureKey, float]]:
    """
    Features summed by the matching log_* potential, each with value 1

    Args:
        kind: "emission" (config, x, label, i), "transition" (a, b) or
            "pattern" (config, x, pattern_id, i)
    """
    if kind == EMISSION:
        keys = emission_features(*args)
    elif kind == TRANSITION:
        keys = transition_features(*args)
    elif kind == "pattern":
        keys = pattern_features(*args)
    else:
        raise ValueError(f"unknown feature kind {kind!r}")
    return [(key, 1.0) for key in keys]


def key_to_string(key: FeatureKey) -> str:
    return "|".join(str(part) for part in key)


def key_from_string(text: str) -> FeatureKey:
    kind, *fields = text.split("|")
    try:
        if kind == EMISSION:
            offset, token, label = fields
            return (EMISSION, int(offset), token, label)
        if kind == TRANSITION:
            a, b = fields
            return (TRANSITION, a, b)
        if kind == BIAS:
            (pattern_id,) = fields
            return (BIAS, int(pattern_id))
        if kind == ANCHOR:
            pattern_id, position, token = fields
            return (ANCHOR, int(pattern_id), int(position), token)
        if kind == POSBUCKET:
            pattern_id, bucket = fields
            return (POSBUCKET, int(pattern_id), int(bucket))
    except ValueError as e:
        raise DataFormatError(f"malformed feature key {text!r}") from e
    raise DataFormatError(f"unknown feature kind in key {text!r}")


@dataclass
class ModelParams:
    """
    Log-space weights θ: a dense transition table plus sparse weight maps

    Emission and pattern maps are keyed by full feature tuples; missing keys
    weigh 0.
    """
    alphabet: Alphabet
    pattern_count: int
    transition: np.ndarray
    emission_weights: Dict[FeatureKey, float] = field(default_factory=dict)
    pattern_weights: Dict[FeatureKey, float] = field(default_factory=dict)

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        size = self.alphabet.size
        if self.transition.shape != (size, size):
            raise ValueError(f"transition table must be {size}x{size}")

    @classmethod
    def zeros(cls, alphabet: Alphabet, pattern_count: int) -> "ModelParams":
        return cls(alphabet=alphabet, pattern_count=pattern_count,
                   transition=np.zeros((alphabet.size, alphabet.size)))

    def weight(self, key: FeatureKey) -> float:
        kind = key[0]
        if kind == TRANSITION:
            return float(self.transition[self.alphabet.index(key[1]), self.alphabet.index(key[2])])
        if kind == EMISSION:
            return self.emission_weights.get(key, 0.0)
        return self.pattern_weights.get(key, 0.0)

    def set_weight(self, key: FeatureKey, value: float):
        if not math.isfinite(value):
            raise ValueError(f"weight for {key_to_string(key)} is not finite")
        kind = key[0]
        if kind == TRANSITION:
            self.transition[self.alphabet.index(key[1]), self.alphabet.index(key[2])] = value
        elif kind == EMISSION:
            self.emission_weights[key] = value
        elif kind in PATTERN_KINDS:
            self.pattern_weights[key] = value
        else:
            raise ValueError(f"unknown feature kind {kind!r}")

    def items(self) -> Iterator[Tuple[FeatureKey, float]]:
        """Every transition entry followed by the stored sparse weights"""
        for a_id, a in enumerate(self.alphabet.symbols):
            for b_id, b in enumerate(self.alphabet.symbols):
                yield (TRANSITION, a, b), float(self.transition[a_id, b_id])
        yield from self.emission_weights.items()
        yield from self.pattern_weights.items()

    def squared_norm(self) -> float:
        return float(sum(value * value for _, value in self.items()))

    def dot(self, counts: Dict[FeatureKey, float]) -> float:
        return float(sum(self.weight(key) * value for key, value in counts.items()))

    def to_vector(self, index: "FeatureIndex") -> np.ndarray:
        return np.array([self.weight(key) for key in index.keys], dtype=np.float64)

    @classmethod
    def from_vector(cls, index: "FeatureIndex", vector: np.ndarray, alphabet: Alphabet,
                    pattern_count: int) -> "ModelParams":
        if not np.all(np.isfinite(vector)):
            raise ValueError("parameter vector has non-finite entries")
        params = cls.zeros(alphabet, pattern_count)
        for key, value in zip(index.keys, vector.tolist()):
            kind = key[0]
            if kind == TRANSITION:
                params.transition[alphabet.index(key[1]), alphabet.index(key[2])] = value
            elif kind == EMISSION:
                params.emission_weights[key] = value
            else:
                params.pattern_weights[key] = value
        return params

    def to_dict(self) -> Dict:
        return {
            TRANSITION: {key_to_string(k): v for k, v in self.items() if k[0] == TRANSITION},
            EMISSION: {key_to_string(k): v for k, v in self.emission_weights.items()},
            "pattern": {key_to_string(k): v for k, v in self.pattern_weights.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict, alphabet: Alphabet, pattern_count: int) -> "ModelParams":
        params = cls.zeros(alphabet, pattern_count)
        for section in (TRANSITION, EMISSION, "pattern"):
            for text, value in data.get(section, {}).items():
                key = key_from_string(text)
                if key[0] in PATTERN_KINDS and not 0 <= key[1] < pattern_count:
                    raise DataFormatError(f"feature {text!r} names an unknown pattern")
                try:
                    params.set_weight(key, float(value))
                except ValueError as e:
                    raise DataFormatError(str(e)) from e
        return params


def log_emission(params: ModelParams, config: FeatureConfig, x: Sequence[str], label: str, i: int) -> float:
    """φ↗ in log space: window features of x around position i (1-based) with the label"""
    return float(sum(params.emission_weights.get(key, 0.0) for key in emission_features(config, x, label, i)))


def log_transition(params: ModelParams, a: str, b: str) -> float:
    alphabet = params.alphabet
    return float(params.transition[alphabet.index(a), alphabet.index(b)])


def log_pattern(params: ModelParams, config: FeatureConfig, x: Sequence[str], pattern_id: int, i: int) -> float:
    """Pattern potential for a match of pattern_id ending at position i"""
    if not 0 <= pattern_id < params.pattern_count:
        raise ValueError(f"unknown pattern id {pattern_id}")
    return float(sum(params.pattern_weights.get(key, 0.0) for key in pattern_features(config, x, pattern_id, i)))


class FeatureIndex:
    """Dense column numbering of feature keys for vectorized training"""

    def __init__(self, keys: Iterable[FeatureKey]):
        self.keys: List[FeatureKey] = []
        self.positions: Dict[FeatureKey, int] = {}
        for key in keys:
            if key not in self.positions:
                self.positions[key] = len(self.keys)
                self.keys.append(key)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self.positions

    @classmethod
    def for_inputs(cls, alphabet: Alphabet, pattern_count: int, config: FeatureConfig,
                   inputs: Iterable[Sequence[str]]) -> "FeatureIndex":
        """Every feature any labeling of the given inputs can activate"""
        def generate():
            for a in alphabet.symbols:
                for b in alphabet.symbols:
                    yield (TRANSITION, a, b)
            for x in inputs:
                for i in range(1, len(x) + 1):
                    for label in alphabet.symbols:
                        yield from emission_features(config, x, label, i)
                    for pattern_id in range(pattern_count):
                        yield from pattern_features(config, x, pattern_id, i)
        return cls(generate())

    def vector(self, counts: Dict[FeatureKey, float]) -> np.ndarray:
        result = np.zeros(len(self.keys))
        missing = 0
        for key, value in counts.items():
            position = self.positions.get(key)
            if position is None:
                missing += 1
                continue
            result[position] += value
        if missing:
            logger.warning(f"{missing} feature counts fall outside the feature index")
        return result


@dataclass
class RPCRFModel:
    """A trained model: weights, feature templates and the pattern machine"""
    params: ModelParams
    config: FeatureConfig
    machine: "LabeledProductDfa"

    def to_dict(self) -> Dict:
        return {
            "format": MODEL_FORMAT,
            "alphabet": self.params.alphabet.declaration(),
            "patterns": list(self.machine.pattern_texts),
            "feature_config": self.config.to_dict(),
            "weights": self.params.to_dict(),
            "machine": self.machine.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict, max_states: Optional[int] = None) -> "RPCRFModel":
        from .pattern_machine import DEFAULT_MAX_STATES, LabeledProductDfa, PatternSet, build_pattern_machine

        if data.get("format") != MODEL_FORMAT:
            raise DataFormatError(f"unsupported model format {data.get('format')!r}")
        try:
            alphabet = Alphabet.from_declaration(data["alphabet"])
            patterns = list(data["patterns"])
            config = FeatureConfig.from_dict(data["feature_config"])
            params = ModelParams.from_dict(data["weights"], alphabet, len(patterns))
            embedded = LabeledProductDfa.from_dict(data["machine"])
        except KeyError as e:
            raise DataFormatError(f"model file is missing {e}") from e
        machine = build_pattern_machine(PatternSet.from_texts(patterns, alphabet),
                                        max_states or DEFAULT_MAX_STATES)
        if machine != embedded:
            raise DataFormatError("embedded machine does not match the one built from the model's patterns")
        return cls(params=params, config=config, machine=machine)


def save_model(path, model: RPCRFModel):
    """Write the model JSON atomically"""
    write_json(path, model.to_dict())
    logger.info(f"Saved model with {model.machine.pattern_count} patterns to {path}")


def load_model(path, max_states: Optional[int] = None) -> RPCRFModel:
    model = RPCRFModel.from_dict(read_json(path), max_states=max_states)
    logger.info(f"Loaded model from {path}: {model.machine.state_count} machine states")
    return model
