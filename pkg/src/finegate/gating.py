"""Per-token representations: word, char, and the combiners that blend them.

The fine-grained gate g = sigma(W_g v + b_g) blends the character encoding c
with the word embedding Ew as h = g * c + (1 - g) * Ew, so high gate values
route character-level information and low values route word-level
information.  The scalar-gate baseline uses one sigmoid for all dimensions,
conditioned on the same feature vector.

All combiner functions accept a single token (rank-1 inputs) or a batch of
tokens stacked as rows (rank-2 inputs).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, EmptySequenceError
from .recurrent import GruParams, run_sequence


@dataclass(frozen=True)
class Token:
    """One token: vocabulary id, character ids, and ingested annotations."""

    surface: str
    word_id: int
    char_ids: tuple[int, ...]
    ner_id: int = 0
    pos_id: int = 0
    freq_bin: int = 0

    def __post_init__(self):
        if len(self.char_ids) == 0:
            raise ContractError(f"Token {self.surface!r}: char_ids must be nonempty")
        if self.word_id < 0:
            raise ContractError(f"Token {self.surface!r}: negative word id")


@dataclass
class EmbeddingTable:
    """A lookup table of row vectors; ``trainable`` gates optimizer updates."""

    e: np.ndarray = field(repr=False)
    trainable: bool = True

    def __post_init__(self):
        if self.e.ndim != 2 or self.e.shape[1] <= 0:
            raise DimensionError(f"EmbeddingTable: expects (rows, dim), got {self.e.shape}")
        if not np.all(np.isfinite(self.e)):
            raise ContractError("EmbeddingTable: rows must be finite")

    @property
    def dim(self) -> int:
        return self.e.shape[1]

    @property
    def rows(self) -> int:
        return self.e.shape[0]

    @classmethod
    def create(cls, rng: np.random.Generator, rows: int, dim: int,
               scale: float = 0.1, trainable: bool = True) -> "EmbeddingTable":
        return cls(rng.normal(0.0, scale, size=(rows, dim)), trainable)


@dataclass
class WordCharGateParams:
    """The gate projection: w_g is (d_e, d_v) and b_g is (d_e,)."""

    w_g: np.ndarray = field(repr=False)
    b_g: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.w_g.ndim != 2 or self.b_g.ndim != 1 or self.w_g.shape[0] != self.b_g.shape[0]:
            raise DimensionError(f"WordCharGateParams: w_g {self.w_g.shape} and "
                                 f"b_g {self.b_g.shape} are inconsistent")

    @classmethod
    def create(cls, rng: np.random.Generator, d_e: int, d_v: int,
               scale: float = 0.05) -> "WordCharGateParams":
        return cls(rng.normal(0.0, scale, size=(d_e, d_v)), np.zeros(d_e))


@dataclass
class ScalarGateParams:
    """The scalar-gate baseline: one weight row over v plus a scalar bias."""

    w_s: np.ndarray = field(repr=False)
    b_s: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, rng: np.random.Generator, d_v: int,
               scale: float = 0.05) -> "ScalarGateParams":
        return cls(rng.normal(0.0, scale, size=d_v), np.zeros(()))


class CombinerKind(enum.Enum):
    WORD_ONLY = "word"
    CHAR_ONLY = "char"
    CONCAT = "concat"
    FEAT_CONCAT = "featconcat"
    SCALAR_GATE = "scalargate"
    FINE_GRAINED_GATE = "finegate"

    @classmethod
    def parse(cls, name: str) -> "CombinerKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ContractError(f"unknown combiner {name!r}; expected one of "
                            f"{[k.value for k in cls]}")

    @property
    def needs_features(self) -> bool:
        return self in (CombinerKind.FEAT_CONCAT, CombinerKind.SCALAR_GATE,
                        CombinerKind.FINE_GRAINED_GATE)

    @property
    def needs_chars(self) -> bool:
        return self is not CombinerKind.WORD_ONLY


def char_encode(tape: T.Tape, params: GruParams, char_ids,
                char_embedding: EmbeddingTable,
                bidirectional: bool = False) -> T.Tensor:
    """Character-level representation: last hidden state of a GRU over chars."""
    ids = np.asarray(char_ids, dtype=np.intp)
    if ids.size == 0:
        raise EmptySequenceError("char_encode: empty character sequence")
    rows = T.take_rows(tape.leaf(char_embedding.e), ids)
    direction = "bidirectional" if bidirectional else "forward"
    return run_sequence(params, rows, "last_state", direction)


def compute_gate(params: WordCharGateParams, v: T.Tensor) -> T.Tensor:
    """g = sigma(W_g v + b_g); accepts one feature vector or a stack of rows."""
    tape = T._tape_of(v)
    w = tape.leaf(params.w_g)
    b = tape.leaf(params.b_g)
    if v.data.ndim == 1:
        if v.shape[0] != params.w_g.shape[1]:
            raise DimensionError(f"compute_gate: v {v.shape} vs w_g {params.w_g.shape}")
        return T.sigmoid(T.add(T.matvec(w, v), b))
    if v.data.ndim == 2:
        if v.shape[1] != params.w_g.shape[1]:
            raise DimensionError(f"compute_gate: v {v.shape} vs w_g {params.w_g.shape}")
        return T.sigmoid(T.add_rowvec(T.matmul(v, T.transpose(w)), b))
    raise DimensionError(f"compute_gate: rank {v.data.ndim} input")


def _scalar_gate(params: ScalarGateParams, v: T.Tensor) -> T.Tensor:
    tape = T._tape_of(v)
    w = tape.leaf(params.w_s)
    b = tape.leaf(params.b_s)
    if v.data.ndim == 1:
        s = T.sum_all(T.mul(w, v))
        return T.sigmoid(T.add_scalar(s, b))
    return T.sigmoid(T.add_scalar(T.matvec(v, w), b))


def combine(kind: CombinerKind,
            c: T.Tensor | None,
            word_vec: T.Tensor,
            v: T.Tensor | None = None,
            gate_params: WordCharGateParams | ScalarGateParams | None = None) -> T.Tensor:
    """Blend character and word representations according to ``kind``.

    Shapes (single / batched): FineGrainedGate and ScalarGate return d_e /
    (n, d_e); Concat returns 2*d_e; FeatConcat returns 2*d_e + d_v; WordOnly
    returns Ew and CharOnly returns c unchanged.
    """
    if kind.needs_chars and c is None:
        raise ContractError(f"combine({kind.value}): character representation required")
    if kind.needs_features and v is None:
        raise ContractError(f"combine({kind.value}): feature vector required")

    if kind is CombinerKind.WORD_ONLY:
        return word_vec
    if kind is CombinerKind.CHAR_ONLY:
        return c
    axis = word_vec.data.ndim - 1
    if kind is CombinerKind.CONCAT:
        return T.concat([word_vec, c], axis=axis)
    if kind is CombinerKind.FEAT_CONCAT:
        return T.concat([word_vec, c, v], axis=axis)

    if c.shape != word_vec.shape:
        raise DimensionError(f"combine: c {c.shape} and Ew {word_vec.shape} differ")
    if kind is CombinerKind.SCALAR_GATE:
        if not isinstance(gate_params, ScalarGateParams):
            raise ContractError("combine(scalargate): ScalarGateParams required")
        s = _scalar_gate(gate_params, v)
        if word_vec.data.ndim == 1:
            return T.add(T.scale_by(c, s), T.scale_by(word_vec, T.one_minus(s)))
        return T.add(T.mul_colvec(c, s), T.mul_colvec(word_vec, T.one_minus(s)))
    if kind is CombinerKind.FINE_GRAINED_GATE:
        if not isinstance(gate_params, WordCharGateParams):
            raise ContractError("combine(finegate): WordCharGateParams required")
        g = compute_gate(gate_params, v)
        return T.add(T.mul(g, c), T.mul(T.one_minus(g), word_vec))
    raise ContractError(f"combine: unhandled kind {kind}")
