"""Gate analysis: which features and tokens lean on character information.

Two views of a trained fine-grained gate.  Per feature: the mean over the
rows of W_g of the column wired to that feature's one-hot slot (positive
means the feature pushes toward character-level representations).  Per
token: the mean gate value sigma(W_g v + b_g) averaged over dimensions and
over every occurrence in a corpus.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from . import tensor as T
from .data import Dataset
from .errors import ContractError
from .features import build_feature_matrix
from .gating import CombinerKind, compute_gate
from .model import Reader


@dataclass
class GateReport:
    feature_means: list[tuple[str, float]]          # (feature, mean weight)
    token_gates: list[tuple[str, float, int]]       # (token, mean gate, count)

    def top_tokens(self, n: int = 50) -> list[tuple[str, float, int]]:
        return self.token_gates[:n]

    def bottom_tokens(self, n: int = 50) -> list[tuple[str, float, int]]:
        return self.token_gates[-n:]


def compute_gate_report(reader: Reader, data: Dataset) -> GateReport:
    if reader.config.combiner is not CombinerKind.FINE_GRAINED_GATE:
        raise ContractError("gate report requires the fine-grained gate combiner, "
                            f"got {reader.config.combiner.value!r}")
    vocab = reader.config.tag_vocab
    names = vocab.feature_names()
    w_g = reader.params["gate.w_g"]
    feature_means = [(name, float(w_g[:, j].mean())) for j, name in enumerate(names)]

    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    tokens = []
    for ex in data.examples:
        tokens.extend(ex.document)
        if ex.query:
            tokens.extend(ex.query)
    for lo in range(0, len(tokens), 512):
        chunk = tokens[lo:lo + 512]
        tape = T.Tape()
        v = build_feature_matrix(tape, chunk, reader.word_table, vocab)
        gates = compute_gate(reader.gate, v).data.mean(axis=1)
        for token, value in zip(chunk, gates):
            sums[token.surface] = sums.get(token.surface, 0.0) + float(value)
            counts[token.surface] = counts.get(token.surface, 0) + 1
    token_gates = [(surface, sums[surface] / counts[surface], counts[surface])
                   for surface in sums]
    token_gates.sort(key=lambda row: (-row[1], row[0]))
    return GateReport(feature_means, token_gates)


def export_gate_report(reader: Reader, data: Dataset, out_path: str) -> GateReport:
    """Write (feature, mean_weight) to ``out_path`` and the full sorted
    (token, mean_gate, count) table to ``<out_path minus .csv>.tokens.csv``."""
    report = compute_gate_report(reader, data)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_weight"])
        for name, value in report.feature_means:
            writer.writerow([name, f"{value:.10g}"])
    stem, _ = os.path.splitext(out_path)
    with open(f"{stem}.tokens.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", "mean_gate", "count"])
        for surface, value, count in report.token_gates:
            writer.writerow([surface, f"{value:.10g}", count])
    return report
