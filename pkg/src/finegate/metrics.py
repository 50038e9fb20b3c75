"""Evaluation metrics: cloze accuracy, span EM/F1, tag ranking metrics.

The ranking/scoring rules are pure functions over probabilities so they can
be pinned against hand-computed fixtures; the ``evaluate_*`` entry points
run a reader over a dataset and reduce with them.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .data import Dataset
from .errors import ContractError
from .model import HeadKind, Reader, predict_cloze, predict_span


# --------------------------------------------------------------------- #
# pure scoring rules

def span_scores(pred_tokens: list[str], gold_tokens: list[str]) -> tuple[float, float]:
    """(exact match, token F1) for one predicted/gold token-string pair.

    F1 is 0 when precision and recall are both zero; spans are at least one
    token by construction, so empty inputs are rejected.
    """
    if not pred_tokens or not gold_tokens:
        raise ContractError("span_scores: spans hold at least one token")
    em = float(" ".join(pred_tokens) == " ".join(gold_tokens))
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return em, 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return em, 2.0 * precision * recall / (precision + recall)


def tag_rank(probs: np.ndarray, gold: int) -> int:
    """1-based rank of the gold tag by descending probability, ties broken
    by ascending tag id."""
    probs = np.asarray(probs)
    if not 0 <= gold < probs.shape[0]:
        raise ContractError(f"tag_rank: gold id {gold} out of range")
    order = np.lexsort((np.arange(probs.shape[0]), -probs))
    return int(np.nonzero(order == gold)[0][0]) + 1


def tag_metrics(prob_rows: list[np.ndarray], gold_ids: list[int],
                k: int = 10) -> tuple[float, float, float]:
    """(precision@1, recall@k, mean rank) over a batch of distributions."""
    if len(prob_rows) != len(gold_ids) or not prob_rows:
        raise ContractError("tag_metrics: need matching, nonempty inputs")
    ranks = np.array([tag_rank(p, g) for p, g in zip(prob_rows, gold_ids)])
    return (float(np.mean(ranks == 1)), float(np.mean(ranks <= k)),
            float(ranks.mean()))


# --------------------------------------------------------------------- #
# dataset-level evaluation

def evaluate_cloze(reader: Reader, data: Dataset) -> float:
    """Fraction of examples whose pointer-sum prediction hits the gold word."""
    _expect(reader, data, HeadKind.CLOZE, "cloze")
    correct = 0
    probs = reader.predict_probs(data.examples)
    for ex, p in zip(data.examples, probs):
        doc_ids = [t.word_id for t in ex.document]
        if predict_cloze(p, doc_ids, ex.candidates) == ex.answer.index:
            correct += 1
    return correct / len(data)


def evaluate_span(reader: Reader, data: Dataset) -> tuple[float, float]:
    """(mean exact match, mean token F1) under strict string comparison."""
    _expect(reader, data, HeadKind.SPAN, "span")
    ems, f1s = [], []
    probs = reader.predict_probs(data.examples)
    for ex, (start_p, end_p) in zip(data.examples, probs):
        s, e = predict_span(start_p, end_p, reader.config.max_span_len)
        gs, ge = ex.answer.span
        pred = [t.surface for t in ex.document[s:e + 1]]
        gold = [t.surface for t in ex.document[gs:ge + 1]]
        em, f1 = span_scores(pred, gold)
        ems.append(em)
        f1s.append(f1)
    return float(np.mean(ems)), float(np.mean(f1s))


def evaluate_tags(reader: Reader, data: Dataset, k: int = 10) -> tuple[float, float, float]:
    """(precision@1, recall@k, mean rank) of the gold tag."""
    _expect(reader, data, HeadKind.TAGS, "tags")
    probs = reader.predict_probs(data.examples)
    gold = [ex.answer.index for ex in data.examples]
    return tag_metrics(probs, gold, k=k)


def primary_metric(reader: Reader, data: Dataset) -> float:
    """The scalar tracked for early stopping and model selection."""
    if reader.config.head is HeadKind.CLOZE:
        return evaluate_cloze(reader, data)
    if reader.config.head is HeadKind.SPAN:
        return evaluate_span(reader, data)[1]
    return evaluate_tags(reader, data)[0]


def metrics_table(reader: Reader, data: Dataset) -> dict[str, float]:
    """All metrics for the reader's task, keyed by metric name."""
    if reader.config.head is HeadKind.CLOZE:
        return {"accuracy": evaluate_cloze(reader, data)}
    if reader.config.head is HeadKind.SPAN:
        em, f1 = evaluate_span(reader, data)
        return {"exact_match": em, "f1": f1}
    p1, r10, mean_rank = evaluate_tags(reader, data)
    return {"precision_at_1": p1, "recall_at_10": r10, "mean_rank": mean_rank}


def _expect(reader: Reader, data: Dataset, head: HeadKind, task: str) -> None:
    if reader.config.head is not head:
        raise ContractError(f"evaluate_{task}: reader head is {reader.config.head.value}")
    if data.task != task:
        raise ContractError(f"evaluate_{task}: dataset task is {data.task!r}")
