"""Feature vectors and document-frequency binning."""

import numpy as np
import pytest

from finegate import tensor as T
from finegate.errors import ContractError
from finegate.features import (FrequencyBinner, TagVocab, build_feature_vector,
                               categorical_block, fit_binner)
from finegate.gating import EmbeddingTable, Token

NER = ("Organization", "Person", "Location", "O")
POS11 = tuple(f"P{i}" for i in range(11))


def _vocab(n_pos=11):
    return TagVocab(NER, tuple(f"P{i}" for i in range(n_pos)))


class TestTagVocab:
    def test_required_tags_enforced(self):
        with pytest.raises(ContractError):
            TagVocab(("Person", "O"), ("NN",))

    def test_duplicates_rejected(self):
        with pytest.raises(ContractError):
            TagVocab(NER + ("O",), ("NN",))

    def test_unknown_maps_to_other(self):
        v = _vocab()
        assert v.ner_id("Person") == 1
        assert v.ner_id("Animal") == len(NER)
        assert v.pos_id("P3") == 3
        assert v.pos_id("ZZZ") == 11

    def test_feature_names_order(self):
        names = _vocab(2).feature_names()
        assert names == ["Organization", "Person", "Location", "O", "NER-OTHER",
                         "P0", "P1", "POS-OTHER",
                         "DOCLEN-0", "DOCLEN-1", "DOCLEN-2", "DOCLEN-3", "DOCLEN-4"]


class TestBinner:
    def test_degenerate_counts_collapse_to_bin_zero(self):
        binner = fit_binner({"a": 1, "b": 1, "c": 1})
        assert all(binner.bin(1) == 0 for _ in range(3))
        assert binner.bin(1) == 0

    def test_uniform_log_counts_split_evenly(self):
        # Counts uniform in log space spanning 1..1e5: each bin takes ~20%.
        counts = {f"w{i}": int(round(10 ** (i / 19.0 * 5))) for i in range(20)}
        binner = fit_binner(counts)
        bins = [binner.bin(c) for c in sorted(counts.values())]
        # Independent percentile check by plain sorting.
        sizes = np.bincount(bins, minlength=5)
        assert sizes.sum() == 20
        assert np.all(np.abs(sizes - 4) <= 1)

    def test_monotone(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            counts = {f"w{i}": int(rng.integers(0, 10000)) for i in range(30)}
            binner = fit_binner(counts)
            values = sorted(counts.values())
            bins = [binner.bin(c) for c in values]
            assert all(b2 >= b1 for b1, b2 in zip(bins, bins[1:]))
            assert all(0 <= b <= 4 for b in bins)

    def test_deterministic(self):
        counts = {f"w{i}": i * 7 % 90 + 1 for i in range(40)}
        assert fit_binner(counts) == fit_binner(dict(reversed(list(counts.items()))))

    def test_empty_map_rejected(self):
        with pytest.raises(ContractError):
            fit_binner({})

    def test_edges_strictly_ascending_enforced(self):
        with pytest.raises(ContractError):
            FrequencyBinner((1.0, 1.0))


class TestFeatureVector:
    def test_three_ones_in_categorical_prefix(self, rng):
        vocab = _vocab()
        table = EmbeddingTable.create(rng, 10, 8)
        token = Token("x", 3, (1,), ner_id=vocab.ner_id("O"), pos_id=0, freq_bin=0)
        tape = T.Tape()
        v = build_feature_vector(tape, token, table, vocab).data
        prefix_len = vocab.ner_block + vocab.pos_block + 5
        prefix = v[:prefix_len]
        assert prefix.sum() == 3.0
        assert set(np.unique(prefix)) == {0.0, 1.0}
        np.testing.assert_array_equal(v[prefix_len:], table.e[3])

    def test_ner_change_touches_only_ner_block(self, rng):
        vocab = _vocab()
        table = EmbeddingTable.create(rng, 10, 8)
        a = Token("x", 3, (1,), ner_id=0, pos_id=2, freq_bin=1)
        b = Token("x", 3, (1,), ner_id=2, pos_id=2, freq_bin=1)
        tape = T.Tape()
        va = build_feature_vector(tape, a, table, vocab).data
        vb = build_feature_vector(tape, b, table, vocab).data
        diff = np.nonzero(va != vb)[0]
        assert set(diff) == {0, 2}
        assert np.all(diff < vocab.ner_block)

    def test_dv_arithmetic(self, rng):
        # |ner| = 5 (4 named + OTHER), |pos| = 12 (11 + OTHER), 5 bins, d_e = 8.
        vocab = _vocab(n_pos=11)
        assert vocab.feature_dim(8) == 5 + 12 + 5 + 8 == 30
        table = EmbeddingTable.create(rng, 10, 8)
        token = Token("x", 0, (1,))
        tape = T.Tape()
        assert build_feature_vector(tape, token, table, vocab).shape == (30,)

    def test_exactly_one_hot_per_block(self, rng):
        vocab = _vocab()
        for _ in range(100):
            token = Token("x", 0, (1,),
                          ner_id=int(rng.integers(0, vocab.ner_block)),
                          pos_id=int(rng.integers(0, vocab.pos_block)),
                          freq_bin=int(rng.integers(0, 5)))
            block = categorical_block(token, vocab)
            splits = np.split(block, [vocab.ner_block, vocab.ner_block + vocab.pos_block])
            for piece in splits:
                assert piece.sum() == 1.0

    def test_out_of_range_annotation_rejected(self):
        vocab = _vocab()
        token = Token("x", 0, (1,), freq_bin=9)
        with pytest.raises(ContractError):
            categorical_block(token, vocab)
