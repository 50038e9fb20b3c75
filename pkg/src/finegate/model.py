"""The K-layer reader: token encoding, per-layer RNN + document-query
interaction, and the answer heads.

Layer k runs RNNs over the previous document representation and over the
query token representations (the query restarts from its token encodings at
every layer), then combines them with fine-grained gating or the
gated-attention baseline.  A cloze head scores every document position with
a learned vector and softmaxes over positions; a span head does the same
twice for start and end; the tag head skips the document-query machinery
entirely (token combiner, one LSTM, softmax over tags).

Forward passes are internally batched: variable-length examples are packed
into one flat token matrix and the RNNs run time-major with masks, so
padded slots never contribute state or gradient.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .attention import DocQueryGateParams, LayerState, fg_attend, ga_attend
from .errors import ContractError, DimensionError
from .features import TagVocab, build_feature_matrix
from .gating import (CombinerKind, EmbeddingTable, ScalarGateParams, Token,
                     WordCharGateParams, combine)
from .recurrent import GruParams, LstmParams, gru_step, lstm_step


class Interaction(enum.Enum):
    GA = "ga"
    FG = "fg"

    @classmethod
    def parse(cls, name: str) -> "Interaction":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ContractError(f"unknown interaction {name!r}; expected ga or fg")


class HeadKind(enum.Enum):
    CLOZE = "cloze"
    SPAN = "span"
    TAGS = "tags"

    @classmethod
    def parse(cls, name: str) -> "HeadKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ContractError(f"unknown head {name!r}; expected cloze, span or tags")


@dataclass(frozen=True)
class Answer:
    """Either an index (cloze answer word id / tag id) or a document span."""

    index: int | None = None
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if (self.index is None) == (self.span is None):
            raise ContractError("Answer: exactly one of index/span must be set")
        if self.span is not None and not 0 <= self.span[0] <= self.span[1]:
            raise ContractError(f"Answer: bad span {self.span}")


@dataclass
class ModelConfig:
    layers: int
    hidden: int
    embed: int
    combiner: CombinerKind
    interaction: Interaction
    head: HeadKind
    vocab_size: int
    alphabet_size: int
    ner_tags: tuple[str, ...]
    pos_tags: tuple[str, ...]
    n_tags: int = 0
    dropout: float = 0.0
    bidirectional: bool = True
    char_bidirectional: bool = False
    trainable_embeddings: bool = True
    max_span_len: int = 15
    forget_bias: float = 0.0

    def __post_init__(self):
        if isinstance(self.combiner, str):
            self.combiner = CombinerKind.parse(self.combiner)
        if isinstance(self.interaction, str):
            self.interaction = Interaction.parse(self.interaction)
        if isinstance(self.head, str):
            self.head = HeadKind.parse(self.head)
        self.ner_tags = tuple(self.ner_tags)
        self.pos_tags = tuple(self.pos_tags)
        if self.layers < 1:
            raise ContractError("ModelConfig: layers must be >= 1")
        for name in ("hidden", "embed", "vocab_size", "alphabet_size"):
            if getattr(self, name) <= 0:
                raise ContractError(f"ModelConfig: {name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError("ModelConfig: dropout must lie in [0, 1)")
        if self.head is HeadKind.TAGS and self.n_tags <= 0:
            raise ContractError("ModelConfig: tag head needs n_tags > 0")
        if self.char_bidirectional and self.embed % 2 != 0:
            raise ContractError("ModelConfig: bidirectional char encoder needs even embed")
        if self.max_span_len < 1:
            raise ContractError("ModelConfig: max_span_len must be >= 1")

    @property
    def tag_vocab(self) -> TagVocab:
        return TagVocab(self.ner_tags, self.pos_tags)

    @property
    def layer_dim(self) -> int:
        return self.hidden * (2 if self.bidirectional else 1)

    @property
    def feature_dim(self) -> int:
        return self.tag_vocab.feature_dim(self.embed)

    @property
    def rep_dim(self) -> int:
        """Width of one token representation after the combiner."""
        if self.combiner in (CombinerKind.WORD_ONLY, CombinerKind.CHAR_ONLY,
                             CombinerKind.SCALAR_GATE, CombinerKind.FINE_GRAINED_GATE):
            return self.embed
        if self.combiner is CombinerKind.CONCAT:
            return 2 * self.embed
        return 2 * self.embed + self.feature_dim

    def to_dict(self) -> dict:
        out = asdict(self)
        out["combiner"] = self.combiner.value
        out["interaction"] = self.interaction.value
        out["head"] = self.head.value
        out["ner_tags"] = list(self.ner_tags)
        out["pos_tags"] = list(self.pos_tags)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


# --------------------------------------------------------------------- #
# decoding (pure numpy, post-softmax)

def predict_cloze(prob: np.ndarray, doc_word_ids, candidates) -> int:
    """Pointer-sum aggregation: argmax candidate by total probability mass
    over every document position holding it; ties go to the lowest word id."""
    if candidates is None or len(candidates) == 0:
        raise ContractError("predict_cloze: empty candidate set")
    prob = np.asarray(prob)
    ids = np.asarray(doc_word_ids)
    if prob.shape != ids.shape:
        raise DimensionError(f"predict_cloze: prob {prob.shape} vs ids {ids.shape}")
    best_id, best_mass = -1, -np.inf
    for cand in sorted(int(c) for c in set(candidates)):
        positions = np.nonzero(ids == cand)[0]
        if positions.size == 0:
            raise ContractError(f"predict_cloze: candidate {cand} absent from document")
        mass = float(prob[positions].sum())
        if mass > best_mass:
            best_id, best_mass = cand, mass
    return best_id


def predict_span(start_prob: np.ndarray, end_prob: np.ndarray, max_len: int = 15) -> tuple[int, int]:
    """Argmax of start_prob[s] * end_prob[e] over s <= e <= s + max_len - 1;
    ties go to the smallest s, then the smallest e."""
    if max_len < 1:
        raise ContractError("predict_span: max_len must be >= 1")
    start_prob = np.asarray(start_prob)
    end_prob = np.asarray(end_prob)
    if start_prob.shape != end_prob.shape or start_prob.ndim != 1:
        raise DimensionError("predict_span: start/end must be equal-length vectors")
    m = start_prob.shape[0]
    best, best_p = (0, 0), -np.inf
    for s in range(m):
        for e in range(s, min(s + max_len, m)):
            p = start_prob[s] * end_prob[e]
            if p > best_p:
                best, best_p = (s, e), p
    return best


# --------------------------------------------------------------------- #
# batching helpers

class _Segments:
    """Row ranges of per-example sequences inside one flat (n, d) matrix."""

    def __init__(self, lengths: Sequence[int], base: int = 0):
        self.lengths = np.asarray(lengths, dtype=np.intp)
        self.offsets = base + np.concatenate([[0], np.cumsum(self.lengths)[:-1]])
        self.t_max = int(self.lengths.max())
        b = len(self.lengths)
        self.gather_idx = np.zeros((b, self.t_max), dtype=np.intp)
        for i, (off, ln) in enumerate(zip(self.offsets, self.lengths)):
            self.gather_idx[i, :ln] = off + np.arange(ln)
        # Per-step masks; None marks steps where every sequence is active.
        self.masks: list[tuple[np.ndarray, np.ndarray] | None] = []
        for t in range(self.t_max):
            active = (self.lengths > t).astype(np.float64)
            self.masks.append(None if active.all() else (active, 1.0 - active))


def _masked_recurrence(tape: T.Tape, flat: T.Tensor, seg: _Segments, cell,
                       reverse: bool) -> list[T.Tensor]:
    """Run a cell over packed sequences; returns per-step (B, H) states."""
    b = len(seg.lengths)
    h = tape.leaf(np.zeros((b, cell.hidden_dim)))
    c = tape.leaf(np.zeros((b, cell.hidden_dim))) if isinstance(cell, LstmParams) else None
    states: list[T.Tensor | None] = [None] * seg.t_max
    order = range(seg.t_max - 1, -1, -1) if reverse else range(seg.t_max)
    for t in order:
        x = T.take_rows(flat, seg.gather_idx[:, t])
        if isinstance(cell, LstmParams):
            h_new, c_new = lstm_step(cell, x, h, c)
        else:
            h_new, c_new = gru_step(cell, x, h), None
        if seg.masks[t] is None:
            h = h_new
            c = c_new
        else:
            keep, drop = seg.masks[t]
            h = T.add(T.mul_colvec(h_new, tape.leaf(keep)),
                      T.mul_colvec(h, tape.leaf(drop)))
            if c_new is not None:
                c = T.add(T.mul_colvec(c_new, tape.leaf(keep)),
                          T.mul_colvec(c, tape.leaf(drop)))
        states[t] = h
    return states  # type: ignore[return-value]


# --------------------------------------------------------------------- #
# the reader

class Reader:
    """Holds the parameter bank and runs forward passes / losses."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        cfg = config
        self.params: dict[str, np.ndarray] = {}

        # Unit-scale embeddings keep the multiplicative interaction layers
        # out of their vanishing regime at this small width.
        self.word_table = EmbeddingTable.create(rng, cfg.vocab_size, cfg.embed,
                                                scale=1.0,
                                                trainable=cfg.trainable_embeddings)
        self.char_table = EmbeddingTable.create(rng, cfg.alphabet_size, cfg.embed,
                                                scale=1.0)
        self._register("word_emb", self.word_table.e)
        self._register("char_emb", self.char_table.e)

        char_hidden = cfg.embed // 2 if cfg.char_bidirectional else cfg.embed
        self.char_gru = GruParams.create(rng, cfg.embed, char_hidden, gain=2.0)
        self._register_group(self.char_gru.named("char_gru"))

        self.gate: WordCharGateParams | None = None
        self.scalar_gate: ScalarGateParams | None = None
        if cfg.combiner is CombinerKind.FINE_GRAINED_GATE:
            self.gate = WordCharGateParams.create(rng, cfg.embed, cfg.feature_dim)
            self._register("gate.w_g", self.gate.w_g)
            self._register("gate.b_g", self.gate.b_g)
        elif cfg.combiner is CombinerKind.SCALAR_GATE:
            self.scalar_gate = ScalarGateParams.create(rng, cfg.feature_dim)
            self._register("scalar_gate.w_s", self.scalar_gate.w_s)
            self._register("scalar_gate.b_s", self.scalar_gate.b_s)

        self.layer_cells: list[dict[str, GruParams]] = []
        self.dq_params: list[DocQueryGateParams] = []
        if cfg.head is not HeadKind.TAGS:
            for k in range(cfg.layers):
                cells = {}
                for role in (("doc_fwd", "doc_bwd", "query_fwd", "query_bwd")
                             if cfg.bidirectional else ("doc_fwd", "query_fwd")):
                    # The query restarts from token representations each layer.
                    dim = cfg.rep_dim if (role.startswith("query") or k == 0) \
                        else cfg.layer_dim
                    cells[role] = GruParams.create(rng, dim, cfg.hidden, gain=2.0)
                    self._register_group(cells[role].named(f"layer{k}.{role}"))
                self.layer_cells.append(cells)
                if cfg.interaction is Interaction.FG:
                    dq = DocQueryGateParams.create(rng, cfg.layer_dim,
                                                   scale=cfg.layer_dim ** -0.5)
                    self.dq_params.append(dq)
                    self._register_group(dq.named(f"layer{k}.dq"))

        head_scale = cfg.layer_dim ** -0.5
        if cfg.head is HeadKind.CLOZE:
            self._register("head.w_score", rng.normal(0.0, head_scale, size=cfg.layer_dim))
        elif cfg.head is HeadKind.SPAN:
            self._register("head.w_start", rng.normal(0.0, head_scale, size=cfg.layer_dim))
            self._register("head.w_end", rng.normal(0.0, head_scale, size=cfg.layer_dim))
        else:
            self.tag_lstm = LstmParams.create(rng, cfg.rep_dim, cfg.hidden,
                                              forget_bias=cfg.forget_bias)
            self._register_group(self.tag_lstm.named("tag_lstm"))
            self._register("head.tag_w",
                           rng.normal(0.0, cfg.hidden ** -0.5, size=(cfg.n_tags, cfg.hidden)))
            self._register("head.tag_b", np.zeros(cfg.n_tags))

    def _register(self, name: str, array: np.ndarray) -> None:
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name}")
        self.params[name] = array

    def _register_group(self, named: Iterable[tuple[str, np.ndarray]]) -> None:
        for name, array in named:
            self._register(name, array)

    def trainable_names(self) -> list[str]:
        skip = set() if self.config.trainable_embeddings else {"word_emb"}
        return [n for n in self.params if n not in skip]

    # ------------------------------------------------------------------ #
    # token representations

    def _token_reps(self, tape: T.Tape, tokens: list[Token]) -> T.Tensor:
        cfg = self.config
        word_ids = np.array([t.word_id for t in tokens], dtype=np.intp)
        if word_ids.max() >= cfg.vocab_size:
            raise ContractError("token word id outside the vocabulary")
        word_vecs = T.take_rows(tape.leaf(self.word_table.e), word_ids)

        chars = None
        if cfg.combiner.needs_chars:
            chars = self._encode_chars(tape, tokens)
        feats = None
        if cfg.combiner.needs_features:
            feats = build_feature_matrix(tape, tokens, self.word_table, cfg.tag_vocab)
        gate_params = self.gate if cfg.combiner is CombinerKind.FINE_GRAINED_GATE \
            else self.scalar_gate
        return combine(cfg.combiner, chars, word_vecs, feats, gate_params)

    def _encode_chars(self, tape: T.Tape, tokens: list[Token]) -> T.Tensor:
        """Batch all tokens' character sequences through the char GRU."""
        cfg = self.config
        n = len(tokens)
        lengths = np.array([len(t.char_ids) for t in tokens], dtype=np.intp)
        t_max = int(lengths.max())
        ids = np.zeros((n, t_max), dtype=np.intp)
        for i, tok in enumerate(tokens):
            if max(tok.char_ids) >= cfg.alphabet_size:
                raise ContractError(f"token {tok.surface!r}: char id outside alphabet")
            ids[i, :lengths[i]] = tok.char_ids
        emb = tape.leaf(self.char_table.e)

        def run(reverse: bool) -> T.Tensor:
            h = tape.leaf(np.zeros((n, self.char_gru.hidden_dim)))
            order = range(t_max - 1, -1, -1) if reverse else range(t_max)
            for t in order:
                x = T.take_rows(emb, ids[:, t])
                h_new = gru_step(self.char_gru, x, h)
                active = (lengths > t).astype(np.float64)
                if active.all():
                    h = h_new
                else:
                    h = T.add(T.mul_colvec(h_new, tape.leaf(active)),
                              T.mul_colvec(h, tape.leaf(1.0 - active)))
            return h

        if cfg.char_bidirectional:
            return T.concat([run(False), run(True)], axis=1)
        return run(False)

    def _dropout(self, tape: T.Tape, t: T.Tensor, train: bool,
                 rng: np.random.Generator | None) -> T.Tensor:
        rate = self.config.dropout
        if not train or rate == 0.0:
            return t
        if rng is None:
            raise ContractError("training forward pass needs an RNG for dropout")
        mask = (rng.random(t.shape) >= rate) / (1.0 - rate)
        return T.mul(t, tape.leaf(mask))

    # ------------------------------------------------------------------ #
    # the K layers

    def _layer_states(self, tape: T.Tape, flat: T.Tensor, seg: _Segments,
                      fwd: GruParams, bwd: GruParams | None) -> list[T.Tensor]:
        states_f = _masked_recurrence(tape, flat, seg, fwd, reverse=False)
        cube_f = T.stack_steps(states_f)
        cube_b = None
        if bwd is not None:
            cube_b = T.stack_steps(_masked_recurrence(tape, flat, seg, bwd, reverse=True))
        return T.unpack_states(cube_f, cube_b, seg.lengths)

    def _document_states(self, tape: T.Tape, examples, train: bool,
                         rng: np.random.Generator | None) -> list[T.Tensor]:
        """Run the K layers; returns the final H_p per example."""
        cfg = self.config
        docs = [ex.document for ex in examples]
        queries = [ex.query for ex in examples]
        for d, q in zip(docs, queries):
            if not d or not q:
                raise ContractError("reader forward: empty document or query")

        all_tokens = [t for d in docs for t in d] + [t for q in queries for t in q]
        reps = self._token_reps(tape, all_tokens)
        n_doc = sum(len(d) for d in docs)
        doc_seg = _Segments([len(d) for d in docs])
        query_seg = _Segments([len(q) for q in queries], base=n_doc)

        doc_ids = [np.array([t.word_id for t in d], dtype=np.intp) for d in docs]
        query_ids = [np.array([t.word_id for t in q], dtype=np.intp) for q in queries]

        h_p_flat = reps            # layer input for documents (rows shared with queries)
        h_p_seg = doc_seg
        new_states: list[T.Tensor] = []
        for k in range(cfg.layers):
            cells = self.layer_cells[k]
            doc_in = self._dropout(tape, h_p_flat, train, rng)
            query_in = self._dropout(tape, reps, train, rng)
            p_list = self._layer_states(tape, doc_in, h_p_seg,
                                        cells["doc_fwd"], cells.get("doc_bwd"))
            q_list = self._layer_states(tape, query_in, query_seg,
                                        cells["query_fwd"], cells.get("query_bwd"))
            new_states = []
            for b in range(len(examples)):
                state = LayerState(p_list[b], q_list[b], doc_ids[b], query_ids[b])
                if cfg.interaction is Interaction.FG:
                    new_states.append(fg_attend(state, self.dq_params[k]))
                else:
                    new_states.append(ga_attend(state))
            if k + 1 < cfg.layers:
                h_p_flat = T.concat(new_states, axis=0) if len(new_states) > 1 \
                    else new_states[0]
                h_p_seg = _Segments([len(d) for d in docs])
        return new_states

    # ------------------------------------------------------------------ #
    # heads and losses

    def batch_outputs(self, tape: T.Tape, examples, train: bool = False,
                      rng: np.random.Generator | None = None):
        """Per-example probability tensors for the configured head."""
        cfg = self.config
        if cfg.head is HeadKind.TAGS:
            return self._tag_probs(tape, examples, train, rng)
        finals = self._document_states(tape, examples, train, rng)
        outputs = []
        if cfg.head is HeadKind.CLOZE:
            w = tape.leaf(self.params["head.w_score"])
            for hp in finals:
                outputs.append(T.softmax(T.matvec(hp, w), axis=0))
        else:
            w_s = tape.leaf(self.params["head.w_start"])
            w_e = tape.leaf(self.params["head.w_end"])
            for hp in finals:
                outputs.append((T.softmax(T.matvec(hp, w_s), axis=0),
                                T.softmax(T.matvec(hp, w_e), axis=0)))
        return outputs

    def _tag_probs(self, tape: T.Tape, examples, train: bool,
                   rng: np.random.Generator | None) -> T.Tensor:
        for ex in examples:
            if ex.query is not None:
                raise ContractError("tag prediction takes no query")
            if not ex.document:
                raise ContractError("tag prediction: empty token sequence")
        tokens = [t for ex in examples for t in ex.document]
        reps = self._dropout(tape, self._token_reps(tape, tokens), train, rng)
        seg = _Segments([len(ex.document) for ex in examples])
        states = _masked_recurrence(tape, reps, seg, self.tag_lstm, reverse=False)
        last = states[-1]  # masking preserves each row's final real state
        logits = T.add_rowvec(T.matmul(last, T.transpose(tape.leaf(self.params["head.tag_w"]))),
                              tape.leaf(self.params["head.tag_b"]))
        return T.softmax(logits, axis=1)

    def batch_loss(self, tape: T.Tape, examples, train: bool = True,
                   rng: np.random.Generator | None = None) -> T.Tensor:
        """Mean negative log-likelihood of the gold answers."""
        cfg = self.config
        if cfg.head is HeadKind.TAGS:
            probs = self._tag_probs(tape, examples, train, rng)
            gold = np.array([ex.answer.index for ex in examples], dtype=np.intp)
            picked = T.gather_pairs(probs, gold)
            return T.scale(T.sum_all(T.log(picked)), -1.0 / len(examples))

        finals = self._document_states(tape, examples, train, rng)
        flat = T.concat(finals, axis=0) if len(finals) > 1 else finals[0]
        lengths = [len(ex.document) for ex in examples]
        if cfg.head is HeadKind.CLOZE:
            positions = []
            for ex in examples:
                ids = np.array([t.word_id for t in ex.document])
                where = np.nonzero(ids == ex.answer.index)[0]
                if where.size == 0:
                    raise ContractError("cloze answer does not occur in the document")
                positions.append(where)
            logits = T.matvec(flat, tape.leaf(self.params["head.w_score"]))
            log_mass = T.pointer_log_mass(logits, lengths, positions)
            return T.scale(T.sum_all(log_mass), -1.0 / len(examples))

        for ex in examples:
            if ex.answer.span[1] >= len(ex.document):
                raise ContractError("span answer exceeds document length")
        start_logits = T.matvec(flat, tape.leaf(self.params["head.w_start"]))
        end_logits = T.matvec(flat, tape.leaf(self.params["head.w_end"]))
        log_start = T.pointer_log_mass(start_logits, lengths,
                                       [[ex.answer.span[0]] for ex in examples])
        log_end = T.pointer_log_mass(end_logits, lengths,
                                     [[ex.answer.span[1]] for ex in examples])
        total = T.add(T.sum_all(log_start), T.sum_all(log_end))
        return T.scale(total, -1.0 / len(examples))

    # ------------------------------------------------------------------ #
    # inference conveniences

    def forward_example(self, document: list[Token], query: list[Token] | None):
        """Head distributions for one example, as numpy arrays."""
        tape = T.Tape()
        shell = _Shell(document, query)
        out = self.batch_outputs(tape, [shell], train=False)
        if self.config.head is HeadKind.TAGS:
            return out.data[0].copy()
        if self.config.head is HeadKind.CLOZE:
            return out[0].data.copy()
        start, end = out[0]
        return start.data.copy(), end.data.copy()

    def predict_probs(self, examples, batch_size: int = 64) -> list:
        """Evaluation-mode distributions for many examples."""
        results = []
        for lo in range(0, len(examples), batch_size):
            chunk = list(examples[lo:lo + batch_size])
            tape = T.Tape()
            out = self.batch_outputs(tape, chunk, train=False)
            if self.config.head is HeadKind.TAGS:
                results.extend(out.data[i].copy() for i in range(len(chunk)))
            elif self.config.head is HeadKind.CLOZE:
                results.extend(o.data.copy() for o in out)
            else:
                results.extend((s.data.copy(), e.data.copy()) for s, e in out)
        return results


@dataclass
class _Shell:
    document: list
    query: list | None
    answer: Answer | None = None
    candidates: tuple | None = None
