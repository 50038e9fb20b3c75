"""Synthetic desk-scale corpora.

``cloze_morph``: each document contains several pluralized nonsense lemmas;
the query names one bare lemma and the answer is its "+s" variant, so the
correct candidate can only be found by matching stems at the character
level.  Dev examples are built entirely from held-out lemmas whose word
embeddings never receive a training gradient, which is what separates the
char-capable combiners from the word-only baseline.  Fillers appear in
every document (frequency bin 4) while lemma variants are rare (low bins),
planting the frequency signal the gate report looks for.

``tag_pred``: short message-like token sequences containing one rare marker
token; the gold tag is a deterministic function of the marker's two-letter
suffix.  Marker stems are drawn from a large space so word embeddings
cannot memorize them.

Both generators are deterministic per seed, down to the bytes on disk.
"""

from __future__ import annotations

import os

import numpy as np

from .data import RawExample, RawToken, document_frequencies, write_dataset_dir
from .errors import ContractError

LEMMA_ALPHABET = "abcdefghij"
NER_TAGS = ["Organization", "Person", "Location", "O"]

CLOZE_POS_TAGS = ["NN", "NNS", "DT", "VB", "VBZ", "WDT", "XX", "."]
CLOZE_VERBS = ["sat", "ran", "hid"]
CLOZE_FILLERS = {"the": "DT", "sat": "VB", "ran": "VB", "hid": "VB", ".": ".",
                 "which": "WDT", "matches": "VBZ", "@blank": "XX"}

TAG_POS_TAGS = ["NN", "NNP", "."]
TAG_FILLERS = ["msg", "from", "to", "re", "fwd", "about", "today", "ok"]
TAG_SUFFIXES = ["ka", "ke", "ki", "ko", "ku", "ma", "me", "mi", "mo", "mu", "na", "ne"]


def _unique_lemmas(rng: np.random.Generator, count: int,
                   lengths=(4, 5), forbidden=()) -> list[str]:
    seen: set[str] = set(forbidden)
    out: list[str] = []
    while len(out) < count:
        n = int(rng.choice(lengths))
        word = "".join(LEMMA_ALPHABET[i] for i in rng.integers(0, len(LEMMA_ALPHABET), n))
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


def _char_list(words) -> list[str]:
    return sorted({ch for w in words for ch in w})


def generate_cloze_morph(out_dir: str, n_train: int = 2000, n_dev: int = 500,
                         seed: int = 0, n_candidates: int = 3) -> None:
    """Write a cloze dataset whose dev split uses only held-out lemmas."""
    if n_train < 1 or n_dev < 1:
        raise ContractError("generate_cloze_morph: sizes must be at least 1")
    rng = np.random.default_rng(seed)
    # Dense lemma pools: each lemma recurs only a handful of times, so
    # memorizing lemma/variant embedding pairs cannot solve the task.
    n_train_lemmas = max(8 * n_candidates, n_train // 3)
    n_dev_lemmas = max(4 * n_candidates, n_dev // 3)
    lemmas = _unique_lemmas(rng, n_train_lemmas + n_dev_lemmas,
                            forbidden=CLOZE_FILLERS)
    train_lemmas = lemmas[:n_train_lemmas]
    dev_lemmas = lemmas[n_train_lemmas:]
    # A fixed entity tag per lemma enriches the NER feature block.
    ner_of = {}
    for lemma in lemmas:
        roll = int(rng.integers(0, 10))
        ner_of[lemma] = NER_TAGS[roll] if roll < 3 else "O"

    def example(pool: list[str]) -> RawExample:
        picks = rng.choice(len(pool), size=n_candidates, replace=False)
        cands = [pool[i] for i in picks]
        target = cands[int(rng.integers(0, n_candidates))]
        doc: list[RawToken] = []
        for lemma in cands:
            verb = CLOZE_VERBS[int(rng.integers(0, len(CLOZE_VERBS)))]
            doc += [RawToken("the", "O", "DT"),
                    RawToken(lemma + "s", ner_of[lemma], "NNS"),
                    RawToken(verb, "O", "VB"),
                    RawToken(".", "O", ".")]
        query = [RawToken("which", "O", "WDT"), RawToken("matches", "O", "VBZ"),
                 RawToken(target, ner_of[target], "NN"), RawToken("@blank", "O", "XX")]
        return RawExample(doc, query, f"word:{target}s",
                          [lemma + "s" for lemma in cands])

    train = [example(train_lemmas) for _ in range(n_train)]
    dev = [example(dev_lemmas) for _ in range(n_dev)]

    words = sorted(set(CLOZE_FILLERS)
                   | {lm for lm in lemmas} | {lm + "s" for lm in lemmas})
    write_dataset_dir(out_dir, {"train": train, "dev": dev},
                      words=words, chars=_char_list(words),
                      ner_tags=NER_TAGS, pos_tags=CLOZE_POS_TAGS, labels=None,
                      doc_freq=document_frequencies(train))
    _write_meta(out_dir, planted=sorted({lm for lm in lemmas}
                                        | {lm + "s" for lm in lemmas}))


def generate_tag_pred(out_dir: str, n_train: int = 800, n_dev: int = 200,
                      seed: int = 0) -> None:
    """Write a tag-prediction dataset keyed on rare marker suffixes."""
    if n_train < 1 or n_dev < 1:
        raise ContractError("generate_tag_pred: sizes must be at least 1")
    rng = np.random.default_rng(seed)
    labels = [f"T{i:02d}" for i in range(len(TAG_SUFFIXES))]
    stems = _unique_lemmas(rng, (n_train + n_dev) // 2 + len(TAG_SUFFIXES),
                           lengths=(3, 4), forbidden=TAG_FILLERS)
    markers: list[str] = []

    def example() -> RawExample:
        suffix_id = int(rng.integers(0, len(TAG_SUFFIXES)))
        stem = stems[int(rng.integers(0, len(stems)))]
        marker = stem + TAG_SUFFIXES[suffix_id]
        markers.append(marker)
        n_lead = int(rng.integers(1, 4))
        n_tail = int(rng.integers(0, 2))
        pick = lambda: TAG_FILLERS[int(rng.integers(0, len(TAG_FILLERS)))]
        doc = [RawToken(pick(), "O", "NN") for _ in range(n_lead)]
        doc.append(RawToken(marker, "O", "NNP"))
        doc += [RawToken(pick(), "O", "NN") for _ in range(n_tail)]
        doc.append(RawToken(".", "O", "."))
        return RawExample(doc, None, f"tag:{labels[suffix_id]}", None)

    train = [example() for _ in range(n_train)]
    dev = [example() for _ in range(n_dev)]

    words = sorted(set(TAG_FILLERS) | {"."} | set(markers))
    write_dataset_dir(out_dir, {"train": train, "dev": dev},
                      words=words, chars=_char_list(words),
                      ner_tags=NER_TAGS, pos_tags=TAG_POS_TAGS, labels=labels,
                      doc_freq=document_frequencies(train))
    _write_meta(out_dir, planted=sorted(set(markers)))


def _write_meta(out_dir: str, planted: list[str]) -> None:
    """Record which surfaces were planted as rare/morphological tokens."""
    with open(os.path.join(out_dir, "planted.txt"), "w", encoding="utf-8") as fh:
        for word in planted:
            fh.write(word + "\n")


def load_planted(data_dir: str) -> set[str]:
    with open(os.path.join(data_dir, "planted.txt"), encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def generate_synthetic(task: str, out_dir: str, n_train: int, n_dev: int,
                       seed: int) -> None:
    if task == "cloze_morph":
        generate_cloze_morph(out_dir, n_train, n_dev, seed)
    elif task == "tag_pred":
        generate_tag_pred(out_dir, n_train, n_dev, seed)
    else:
        raise ContractError(f"unknown synthetic task {task!r}; expected "
                            "cloze_morph or tag_pred")
