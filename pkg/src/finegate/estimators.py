"""Scikit-learn style wrappers around the readers.

``fit(X, y=None)`` accepts either a :class:`~finegate.data.Dataset` or a
sequence of :class:`~finegate.data.Example`; answers travel inside the
examples.  ``predict`` returns task-native answers (candidate word ids,
(start, end) spans, tag ids) and ``score`` the task's headline metric.
Constructor arguments follow sklearn conventions, so ``get_params`` /
``set_params`` / ``clone`` work out of the box.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .data import Dataset, Example, Vocabularies
from .errors import ContractError
from .metrics import evaluate_cloze, evaluate_span, evaluate_tags
from .model import HeadKind, ModelConfig, Reader, predict_cloze, predict_span
from .train import TrainConfig, train


def as_examples(x) -> list[Example]:
    if isinstance(x, Dataset):
        return x.examples
    examples = list(x)
    if not examples:
        raise ContractError("no examples given")
    for i, ex in enumerate(examples):
        if not isinstance(ex, Example):
            raise ContractError(f"item {i} is {type(ex).__name__}, expected Example")
    return examples


class _ReaderEstimator(BaseEstimator):
    """Shared config surface and fit plumbing; subclasses fix the head."""

    _head: HeadKind

    def __init__(self, vocab=None, combiner="finegate", interaction="fg",
                 layers=2, hidden=32, embed=16, dropout=0.0,
                 trainable_embeddings=True, optimizer="adam",
                 learning_rate=5e-4, batch_size=32, epochs=30,
                 clip_norm=10.0, patience=None, seed=0, max_span_len=15):
        self.vocab = vocab
        self.combiner = combiner
        self.interaction = interaction
        self.layers = layers
        self.hidden = hidden
        self.embed = embed
        self.dropout = dropout
        self.trainable_embeddings = trainable_embeddings
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.clip_norm = clip_norm
        self.patience = patience
        self.seed = seed
        self.max_span_len = max_span_len

    # ------------------------------------------------------------------ #

    def _resolve_vocab(self, x) -> Vocabularies:
        if self.vocab is not None:
            return self.vocab
        if isinstance(x, Dataset):
            return x.vocab
        raise ContractError("pass vocab= to the constructor or fit on a Dataset")

    def _model_config(self, vocab: Vocabularies) -> ModelConfig:
        return ModelConfig(
            layers=self.layers, hidden=self.hidden, embed=self.embed,
            combiner=self.combiner, interaction=self.interaction, head=self._head,
            vocab_size=len(vocab.words), alphabet_size=len(vocab.chars),
            ner_tags=vocab.tags.ner_tags, pos_tags=vocab.tags.pos_tags,
            n_tags=len(vocab.labels) if vocab.labels else 0,
            dropout=self.dropout, trainable_embeddings=self.trainable_embeddings,
            max_span_len=self.max_span_len)

    def fit(self, X, y=None, dev=None):
        """Train on X; ``dev`` (Dataset or Example list) drives early stopping
        and best-checkpoint selection when given."""
        vocab = self._resolve_vocab(X)
        task = self._head.value
        train_data = Dataset(task, as_examples(X), vocab)
        dev_data = Dataset(task, as_examples(dev), vocab) if dev is not None else None
        self.config_ = self._model_config(vocab)
        self.reader_ = Reader(self.config_, seed=self.seed)
        self.history_ = train(
            self.reader_, train_data, dev_data,
            TrainConfig(optimizer=self.optimizer, learning_rate=self.learning_rate,
                        batch_size=self.batch_size, epochs=self.epochs,
                        clip_norm=self.clip_norm, seed=self.seed,
                        patience=self.patience))
        self.vocab_ = vocab
        return self

    def _check_fitted(self) -> Reader:
        if not hasattr(self, "reader_"):
            raise ContractError("estimator is not fitted; call fit first")
        return self.reader_

    def predict_proba(self, X) -> list:
        return self._check_fitted().predict_probs(as_examples(X))


class ClozeReader(_ReaderEstimator):
    """Cloze question answering with pointer-sum decoding."""

    _head = HeadKind.CLOZE

    def predict(self, X) -> np.ndarray:
        reader = self._check_fitted()
        examples = as_examples(X)
        out = []
        for ex, probs in zip(examples, reader.predict_probs(examples)):
            doc_ids = [t.word_id for t in ex.document]
            out.append(predict_cloze(probs, doc_ids, ex.candidates))
        return np.asarray(out)

    def score(self, X, y=None) -> float:
        reader = self._check_fitted()
        return evaluate_cloze(reader, Dataset("cloze", as_examples(X), self.vocab_))


class SpanReader(_ReaderEstimator):
    """Answer-span extraction; ``score`` is token-level F1."""

    _head = HeadKind.SPAN

    def predict(self, X) -> list[tuple[int, int]]:
        reader = self._check_fitted()
        examples = as_examples(X)
        return [predict_span(start, end, reader.config.max_span_len)
                for start, end in reader.predict_probs(examples)]

    def score(self, X, y=None) -> float:
        reader = self._check_fitted()
        return evaluate_span(reader, Dataset("span", as_examples(X), self.vocab_))[1]


class TagPredictor(_ReaderEstimator):
    """Sequence-level tag prediction (combiner + LSTM + softmax)."""

    _head = HeadKind.TAGS

    def predict(self, X) -> np.ndarray:
        reader = self._check_fitted()
        probs = reader.predict_probs(as_examples(X))
        # Argmax with ties to the lowest tag id, matching the ranking rule.
        return np.asarray([int(np.argmax(p)) for p in probs])

    def score(self, X, y=None) -> float:
        reader = self._check_fitted()
        data = Dataset("tags", as_examples(X), self.vocab_)
        return evaluate_tags(reader, data)[0]
