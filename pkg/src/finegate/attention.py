"""Document-query interaction layers.

``fg_attend`` implements the pairwise fine-grained gating

    h_i = sum_j softmax_j(u_h . I_ij + match(i, j) * b_h1 + b_h2) I_ij,
    I_ij = tanh(p_i * q_j)

where match(i, j) is 1 exactly when document token i and query token j share
a word id (the one-hot inner product).  ``ga_attend`` is the gated-attention
baseline: each document state is multiplied elementwise by a softmax-weighted
summary of the query states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError

# Materializing the full M x N x d interaction tensor is fine at desk scale;
# refuse anything that would not be.
MAX_INTERACTION_ELEMENTS = 10**8


@dataclass
class LayerState:
    """Per-layer document/query hidden states plus the word ids behind them."""

    p: T.Tensor
    q: T.Tensor
    doc_word_ids: np.ndarray
    query_word_ids: np.ndarray

    def __post_init__(self):
        if self.p.data.ndim != 2 or self.q.data.ndim != 2:
            raise DimensionError(f"LayerState: P {self.p.shape} and Q {self.q.shape} "
                                 "must be matrices")
        if self.p.shape[1] != self.q.shape[1]:
            raise DimensionError(f"LayerState: row widths differ, P {self.p.shape} "
                                 f"vs Q {self.q.shape}")
        if self.p.shape[0] < 1 or self.q.shape[0] < 1:
            raise ContractError("LayerState: M and N must be at least 1")
        self.doc_word_ids = np.asarray(self.doc_word_ids, dtype=np.intp)
        self.query_word_ids = np.asarray(self.query_word_ids, dtype=np.intp)
        if self.doc_word_ids.shape != (self.p.shape[0],):
            raise DimensionError("LayerState: doc_word_ids length != M")
        if self.query_word_ids.shape != (self.q.shape[0],):
            raise DimensionError("LayerState: query_word_ids length != N")


@dataclass
class DocQueryGateParams:
    """Attention scorer: u_h over interaction rows plus two scalar biases."""

    u_h: np.ndarray = field(repr=False)
    b_h1: np.ndarray = field(repr=False)
    b_h2: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, rng: np.random.Generator, d: int, scale: float = 0.1) -> "DocQueryGateParams":
        return cls(rng.normal(0.0, scale, size=d), np.zeros(()), np.zeros(()))

    def named(self, prefix: str):
        for key in ("u_h", "b_h1", "b_h2"):
            yield f"{prefix}.{key}", getattr(self, key)


def fg_interaction(p_i: T.Tensor, q_j: T.Tensor) -> T.Tensor:
    """I_ij = tanh(p_i * q_j) for a single token pair."""
    if p_i.shape != q_j.shape or p_i.data.ndim != 1:
        raise DimensionError(f"fg_interaction: shapes {p_i.shape} and {q_j.shape}")
    return T.tanh(T.mul(p_i, q_j))


def match_matrix(doc_word_ids, query_word_ids) -> np.ndarray:
    """1.0 where document and query tokens carry the same word id."""
    d = np.asarray(doc_word_ids).reshape(-1, 1)
    q = np.asarray(query_word_ids).reshape(1, -1)
    return (d == q).astype(np.float64)


def _check_size(m: int, n: int, d: int) -> None:
    if m * n * d > MAX_INTERACTION_ELEMENTS:
        raise ContractError(f"interaction tensor {m}x{n}x{d} exceeds the "
                            f"{MAX_INTERACTION_ELEMENTS}-element guard")


def fg_attend(state: LayerState, params: DocQueryGateParams) -> T.Tensor:
    """Fine-grained document-query gating; returns the new (M, d) document states."""
    m, d = state.p.shape
    n = state.q.shape[0]
    if params.u_h.shape != (d,):
        raise DimensionError(f"fg_attend: u_h {params.u_h.shape} does not match d={d}")
    _check_size(m, n, d)
    tape = T._tape_of(state.p, state.q)

    interactions = T.tanh(T.pairwise_mul(state.p, state.q))
    logits = T.dot_last_affine(interactions, tape.leaf(params.u_h),
                               match_matrix(state.doc_word_ids, state.query_word_ids),
                               tape.leaf(params.b_h1), tape.leaf(params.b_h2))
    weights = T.softmax(logits, axis=1)
    return T.attend_sum(weights, interactions)


def ga_attend(state: LayerState) -> T.Tensor:
    """Gated-attention baseline: p_i * (softmax_j(p_i . q_j) weighted query sum)."""
    scores = T.matmul(state.p, T.transpose(state.q))
    weights = T.softmax(scores, axis=1)
    gates = T.matmul(weights, state.q)
    return T.mul(state.p, gates)
