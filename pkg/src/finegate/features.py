"""The gate's conditioning features: tag vocabularies, frequency bins, and
the feature vector v = [NER one-hot | POS one-hot | freq-bin one-hot | Ew].

Tags are ingested from data files, never computed here.  Document-frequency
bins are fit once on the training corpus: bin edges sit at the 20/40/60/80th
percentiles of log(1 + count), so bin 0 holds the rarest words and bin 4 the
most frequent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import tensor as T
from .errors import ContractError
from .gating import EmbeddingTable, Token

N_FREQ_BINS = 5
REQUIRED_NER_TAGS = ("Organization", "Person", "Location", "O")


@dataclass(frozen=True)
class TagVocab:
    """Ordered NER/POS tag lists; unknown tags map to a trailing OTHER slot."""

    ner_tags: tuple[str, ...]
    pos_tags: tuple[str, ...]
    n_freq_bins: int = N_FREQ_BINS

    def __post_init__(self):
        for name, tags in (("ner", self.ner_tags), ("pos", self.pos_tags)):
            if len(set(tags)) != len(tags):
                raise ContractError(f"TagVocab: duplicate {name} tags")
        missing = [t for t in REQUIRED_NER_TAGS if t not in self.ner_tags]
        if missing:
            raise ContractError(f"TagVocab: required NER tags missing: {missing}")
        if self.n_freq_bins != N_FREQ_BINS:
            raise ContractError(f"TagVocab: n_freq_bins is fixed at {N_FREQ_BINS}")

    # One-hot block widths include the OTHER slot.
    @property
    def ner_block(self) -> int:
        return len(self.ner_tags) + 1

    @property
    def pos_block(self) -> int:
        return len(self.pos_tags) + 1

    def ner_id(self, tag: str) -> int:
        try:
            return self.ner_tags.index(tag)
        except ValueError:
            return len(self.ner_tags)

    def pos_id(self, tag: str) -> int:
        try:
            return self.pos_tags.index(tag)
        except ValueError:
            return len(self.pos_tags)

    def feature_names(self) -> list[str]:
        """Report row labels, in feature-vector column order."""
        return (list(self.ner_tags) + ["NER-OTHER"]
                + list(self.pos_tags) + ["POS-OTHER"]
                + [f"DOCLEN-{n}" for n in range(self.n_freq_bins)])

    def feature_dim(self, d_e: int) -> int:
        return self.ner_block + self.pos_block + self.n_freq_bins + d_e


@dataclass(frozen=True)
class FrequencyBinner:
    """Monotone count -> bin map with at most four strictly ascending edges."""

    bin_edges: tuple[float, ...] = field(default=())

    def __post_init__(self):
        edges = np.asarray(self.bin_edges)
        if edges.size and np.any(np.diff(edges) <= 0):
            raise ContractError("FrequencyBinner: edges must be strictly ascending")
        if edges.size > N_FREQ_BINS - 1:
            raise ContractError("FrequencyBinner: at most 4 edges")

    def bin(self, count: int) -> int:
        if count < 0:
            raise ContractError(f"FrequencyBinner: negative count {count}")
        return int(np.searchsorted(np.asarray(self.bin_edges), np.log1p(count), side="left"))


def fit_binner(doc_frequencies: dict[str, int]) -> FrequencyBinner:
    """Fit percentile bin edges on log(1 + count) over the observed counts."""
    if not doc_frequencies:
        raise ContractError("fit_binner: empty frequency map")
    logs = np.log1p(np.array(sorted(doc_frequencies.values()), dtype=np.float64))
    edges = np.unique(np.percentile(logs, [20.0, 40.0, 60.0, 80.0]))
    # An edge at (or below) the minimum can never separate anything.
    edges = edges[edges > logs[0]]
    return FrequencyBinner(tuple(float(e) for e in edges))


@lru_cache(maxsize=8192)
def _cat_row(ner_block: int, pos_block: int, n_bins: int,
             ner: int, pos: int, freq_bin: int) -> np.ndarray:
    out = np.zeros(ner_block + pos_block + n_bins)
    out[ner] = 1.0
    out[ner_block + pos] = 1.0
    out[ner_block + pos_block + freq_bin] = 1.0
    out.setflags(write=False)
    return out


def categorical_block(token: Token, vocab: TagVocab) -> np.ndarray:
    """The constant one-hot prefix of v for one token (cached, read-only)."""
    for value, width, label in ((token.ner_id, vocab.ner_block, "ner"),
                                (token.pos_id, vocab.pos_block, "pos"),
                                (token.freq_bin, vocab.n_freq_bins, "freq bin")):
        if not 0 <= value < width:
            raise ContractError(f"token {token.surface!r}: {label} id {value} "
                                f"out of range [0, {width})")
    return _cat_row(vocab.ner_block, vocab.pos_block, vocab.n_freq_bins,
                    token.ner_id, token.pos_id, token.freq_bin)


def build_feature_vector(tape: T.Tape, token: Token, table: EmbeddingTable,
                         vocab: TagVocab) -> T.Tensor:
    """v for one token; only the embedding suffix carries gradients."""
    if token.word_id >= table.rows:
        raise ContractError(f"token {token.surface!r}: word id {token.word_id} "
                            f"outside table with {table.rows} rows")
    prefix = tape.leaf(categorical_block(token, vocab))
    suffix = T.take_row(tape.leaf(table.e), token.word_id)
    return T.concat([prefix, suffix], axis=0)


def build_feature_matrix(tape: T.Tape, tokens: list[Token], table: EmbeddingTable,
                         vocab: TagVocab) -> T.Tensor:
    """Stack v for many tokens: constant prefix block next to gathered rows."""
    if not tokens:
        raise ContractError("build_feature_matrix: no tokens")
    prefix = np.stack([categorical_block(t, vocab) for t in tokens])
    word_ids = np.array([t.word_id for t in tokens], dtype=np.intp)
    if word_ids.max() >= table.rows:
        raise ContractError("build_feature_matrix: word id outside embedding table")
    suffix = T.take_rows(tape.leaf(table.e), word_ids)
    return T.concat([tape.leaf(prefix), suffix], axis=1)
