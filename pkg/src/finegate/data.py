"""Dataset types and the on-disk format.

A dataset directory holds one text file per split plus sidecar vocabularies:

* ``<split>.txt`` -- one example per line, four tab-separated fields:

  1. document: space-separated tokens, each serialized ``surface|ner|pos``
  2. query: same encoding, or ``-`` when the task has no query
  3. answer: ``word:<surface>`` (cloze), ``span:<start>:<end>`` (inclusive
     token indices), or ``tag:<label>``
  4. candidates: comma-separated surfaces, or ``-``

* ``words.txt`` / ``chars.txt`` -- one symbol per line; line 0 is the
  reserved ``<unk>`` entry in both
* ``ner.txt`` / ``pos.txt`` -- known tag names (unknown tags map to OTHER)
* ``labels.txt`` -- tag-prediction label names (absent for cloze/span data)
* ``docfreq.txt`` -- ``surface<TAB>count`` document frequencies over the
  training split, where a word's count is the number of training examples
  whose document or query contains it

Surfaces may not contain whitespace, ``|`` or commas.  Loading resolves
every token against the sidecars (out-of-vocabulary words map to ``<unk>``
id 0 while their characters still flow through the char encoder) and
annotates each token with its document-frequency bin from a binner fit on
``docfreq.txt``.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError
from .features import FrequencyBinner, TagVocab, fit_binner
from .gating import Token
from .model import Answer

UNK = "<unk>"
_FORBIDDEN = set(" \t|,")


@dataclass
class Vocab:
    """Ordered symbol list with optional unknown-symbol fallback at id 0."""

    symbols: list[str]
    has_unk: bool = True
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.has_unk and (not self.symbols or self.symbols[0] != UNK):
            self.symbols = [UNK] + list(self.symbols)
        if len(set(self.symbols)) != len(self.symbols):
            raise ContractError("Vocab: duplicate symbols")
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def id(self, symbol: str) -> int:
        got = self.index.get(symbol)
        if got is None:
            if self.has_unk:
                return 0
            raise ContractError(f"unknown symbol {symbol!r}")
        return got

    def symbol(self, i: int) -> str:
        return self.symbols[i]


@dataclass
class Vocabularies:
    words: Vocab
    chars: Vocab
    tags: TagVocab
    labels: Vocab | None
    doc_frequencies: dict[str, int]
    binner: FrequencyBinner

    def make_token(self, surface: str, ner: str, pos: str) -> Token:
        return Token(surface=surface,
                     word_id=self.words.id(surface),
                     char_ids=tuple(self.chars.id(ch) for ch in surface),
                     ner_id=self.tags.ner_id(ner),
                     pos_id=self.tags.pos_id(pos),
                     freq_bin=self.binner.bin(self.doc_frequencies.get(surface, 0)))


@dataclass
class Example:
    document: list[Token]
    query: list[Token] | None
    answer: Answer
    candidates: tuple[int, ...] | None = None


@dataclass
class Dataset:
    task: str                   # "cloze" | "span" | "tags"
    examples: list[Example]
    vocab: Vocabularies

    def __len__(self) -> int:
        return len(self.examples)


# --------------------------------------------------------------------- #
# raw records (what generators produce and the writer serializes)

@dataclass(frozen=True)
class RawToken:
    surface: str
    ner: str = "O"
    pos: str = "NN"


@dataclass
class RawExample:
    document: list[RawToken]
    query: list[RawToken] | None
    answer: str                       # serialized answer field
    candidates: list[str] | None = None


def _check_surface(surface: str) -> str:
    if not surface or any(ch in _FORBIDDEN for ch in surface):
        raise ContractError(f"surface {surface!r} is empty or contains a "
                            "reserved character")
    return surface


def _format_tokens(tokens: list[RawToken]) -> str:
    return " ".join(f"{_check_surface(t.surface)}|{t.ner}|{t.pos}" for t in tokens)


def document_frequencies(examples: list[RawExample]) -> dict[str, int]:
    """Number of examples whose document or query mentions each surface."""
    counts: Counter[str] = Counter()
    for ex in examples:
        seen = {t.surface for t in ex.document}
        if ex.query:
            seen.update(t.surface for t in ex.query)
        counts.update(seen)
    return dict(counts)


def write_split(path: str, examples: list[RawExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            query = _format_tokens(ex.query) if ex.query else "-"
            cands = ",".join(_check_surface(c) for c in ex.candidates) \
                if ex.candidates else "-"
            fh.write(f"{_format_tokens(ex.document)}\t{query}\t{ex.answer}\t{cands}\n")


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_dataset_dir(out_dir: str,
                      splits: dict[str, list[RawExample]],
                      words: list[str], chars: list[str],
                      ner_tags: list[str], pos_tags: list[str],
                      labels: list[str] | None,
                      doc_freq: dict[str, int]) -> None:
    """Write split files plus all sidecars; ids are line numbers."""
    os.makedirs(out_dir, exist_ok=True)
    for name, examples in splits.items():
        write_split(os.path.join(out_dir, f"{name}.txt"), examples)
    _write_lines(os.path.join(out_dir, "words.txt"), [UNK] + list(words))
    _write_lines(os.path.join(out_dir, "chars.txt"), [UNK] + list(chars))
    _write_lines(os.path.join(out_dir, "ner.txt"), list(ner_tags))
    _write_lines(os.path.join(out_dir, "pos.txt"), list(pos_tags))
    if labels is not None:
        _write_lines(os.path.join(out_dir, "labels.txt"), list(labels))
    _write_lines(os.path.join(out_dir, "docfreq.txt"),
                 [f"{w}\t{c}" for w, c in sorted(doc_freq.items())])


# --------------------------------------------------------------------- #
# loading

def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def load_vocabularies(data_dir: str) -> Vocabularies:
    words = Vocab(_read_lines(os.path.join(data_dir, "words.txt")))
    chars = Vocab(_read_lines(os.path.join(data_dir, "chars.txt")))
    tags = TagVocab(tuple(_read_lines(os.path.join(data_dir, "ner.txt"))),
                    tuple(_read_lines(os.path.join(data_dir, "pos.txt"))))
    labels_path = os.path.join(data_dir, "labels.txt")
    labels = None
    if os.path.exists(labels_path):
        label_lines = _read_lines(labels_path)
        if label_lines:
            labels = Vocab(label_lines, has_unk=False)
    freq: dict[str, int] = {}
    for line in _read_lines(os.path.join(data_dir, "docfreq.txt")):
        word, count = line.split("\t")
        freq[word] = int(count)
    return Vocabularies(words, chars, tags, labels, freq, fit_binner(freq))


def _parse_tokens(text: str, vocab: Vocabularies, where: str) -> list[Token]:
    tokens = []
    for piece in text.split(" "):
        parts = piece.split("|")
        if len(parts) != 3:
            raise ContractError(f"{where}: malformed token {piece!r}")
        tokens.append(vocab.make_token(*parts))
    return tokens


def _parse_answer(text: str, vocab: Vocabularies, where: str) -> tuple[str, Answer]:
    kind, _, rest = text.partition(":")
    if kind == "word" and rest:
        return "cloze", Answer(index=vocab.words.id(rest))
    if kind == "span":
        try:
            start, end = (int(x) for x in rest.split(":"))
        except ValueError:
            raise ContractError(f"{where}: malformed span answer {text!r}") from None
        return "span", Answer(span=(start, end))
    if kind == "tag" and rest:
        if vocab.labels is None:
            raise ContractError(f"{where}: tag answer but no labels.txt sidecar")
        return "tags", Answer(index=vocab.labels.id(rest))
    raise ContractError(f"{where}: malformed answer field {text!r}")


def load_split(data_dir: str, split: str,
               vocab: Vocabularies | None = None) -> Dataset:
    """Load and validate one split of a dataset directory."""
    vocab = vocab or load_vocabularies(data_dir)
    path = os.path.join(data_dir, f"{split}.txt")
    examples: list[Example] = []
    task: str | None = None
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        where = f"{path}:{lineno}"
        fields = line.split("\t")
        if len(fields) != 4:
            raise ContractError(f"{where}: expected 4 tab-separated fields, "
                                f"got {len(fields)}")
        doc = _parse_tokens(fields[0], vocab, where)
        query = None if fields[1] == "-" else _parse_tokens(fields[1], vocab, where)
        this_task, answer = _parse_answer(fields[2], vocab, where)
        if task is None:
            task = this_task
        elif task != this_task:
            raise ContractError(f"{where}: mixed answer kinds in one split")
        candidates = None
        if fields[3] != "-":
            candidates = tuple(vocab.words.id(c) for c in fields[3].split(","))
        examples.append(Example(doc, query, answer, candidates))
        _validate_example(examples[-1], this_task, vocab, where)
    if not examples:
        raise ContractError(f"{path}: empty split")
    return Dataset(task, examples, vocab)


def _validate_example(ex: Example, task: str, vocab: Vocabularies, where: str) -> None:
    doc_ids = [t.word_id for t in ex.document]
    if task == "cloze":
        if ex.query is None:
            raise ContractError(f"{where}: cloze example without a query")
        if not ex.candidates:
            raise ContractError(f"{where}: cloze example without candidates")
        if ex.answer.index not in ex.candidates:
            raise ContractError(f"{where}: answer is not among the candidates")
        if ex.answer.index not in doc_ids:
            raise ContractError(f"{where}: cloze answer does not occur in document")
        for cand in ex.candidates:
            if cand not in doc_ids:
                raise ContractError(f"{where}: candidate {vocab.words.symbol(cand)!r} "
                                    "does not occur in document")
    elif task == "span":
        if ex.query is None:
            raise ContractError(f"{where}: span example without a query")
        start, end = ex.answer.span
        if end >= len(ex.document):
            raise ContractError(f"{where}: span ({start}, {end}) exceeds document "
                                f"length {len(ex.document)}")
    else:
        if ex.query is not None:
            raise ContractError(f"{where}: tag example must not carry a query")
        if vocab.labels is None or not 0 <= ex.answer.index < len(vocab.labels):
            raise ContractError(f"{where}: tag id {ex.answer.index} out of range")
