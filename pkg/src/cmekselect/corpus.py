"""Document collections: preprocessing, JSONL loading/saving, and
deterministic stratified splitting.

Preprocessing is intentionally minimal: lowercase everything, strip ASCII
punctuation, split on whitespace. No stemming, stop words, or spelling
correction.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path

from .seeding import derive_seed

# The 32 printable ASCII symbols; non-ASCII characters are kept verbatim.
PUNCTUATION = string.punctuation
_STRIP_TABLE = str.maketrans("", "", PUNCTUATION)


def preprocess(raw_text: str) -> list[str]:
    """Lowercase, strip ASCII punctuation, and whitespace-split a string.

    Empty tokens are dropped; token order is preserved. An empty input
    yields an empty list.
    """
    return raw_text.lower().translate(_STRIP_TABLE).split()


@dataclass(frozen=True)
class Document:
    """One tokenized document with an optional binary sentiment label."""

    tokens: tuple[str, ...]
    label: int | None
    id: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class LabeledCorpus:
    """An immutable domain sample: one named collection of documents.

    Candidate (source) corpora must be fully labeled; target corpora may
    carry unlabeled documents. Instances are safe to share across workers.
    """

    name: str
    documents: tuple[Document, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def fully_labeled(self) -> bool:
        return all(d.label is not None for d in self.documents)

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {0: 0, 1: 0}
        for d in self.documents:
            if d.label is not None:
                counts[d.label] += 1
        return counts

    def subset(self, indices, name: str | None = None) -> "LabeledCorpus":
        """New corpus holding the documents at the given positions (ids kept)."""
        docs = tuple(self.documents[i] for i in indices)
        return LabeledCorpus(name or self.name, docs, self.provenance)

    def strip_labels(self) -> "LabeledCorpus":
        """Copy with every label removed (marginal-only view of the domain)."""
        docs = tuple(Document(d.tokens, None, d.id) for d in self.documents)
        return LabeledCorpus(self.name, docs, self.provenance)


@dataclass(frozen=True)
class SplitSpec:
    """Fold count and seed for stratified cross-validation splitting."""

    fold_count: int
    seed: int

    def __post_init__(self):
        if self.fold_count < 2:
            raise ValueError(f"fold_count must be >= 2, got {self.fold_count}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def load_corpus(path, name: str, require_labels: bool = True) -> LabeledCorpus:
    """Load a corpus from a UTF-8 JSONL file.

    Each line must be an object with a "text" field; "label" must be the
    integer 0 or 1 and is required when ``require_labels`` is set (source
    corpora). Documents get ids in file order.
    """
    path = Path(path)
    docs = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for lineno, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed line {lineno} in {path}: {exc.msg}") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise ValueError(f"malformed line {lineno} in {path}: expected object with string 'text'")
        label = obj.get("label")
        if label is not None and (isinstance(label, bool) or label not in (0, 1)):
            raise ValueError(f"invalid label at line {lineno}")
        if label is None and require_labels:
            raise ValueError(f"missing label at line {lineno}")
        docs.append(Document(tuple(preprocess(obj["text"])), label, len(docs)))
    if not docs:
        raise ValueError(f"empty corpus: {path}")
    return LabeledCorpus(name, tuple(docs), provenance=str(path))


def save_corpus(corpus: LabeledCorpus, path) -> None:
    """Write a corpus back to JSONL (tokens joined by single spaces)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            obj = {"text": " ".join(doc.tokens)}
            if doc.label is not None:
                obj["label"] = doc.label
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_manifest(path) -> list[tuple[str, LabeledCorpus]]:
    """Load every corpus listed in a manifest JSON file.

    The manifest is a list of {"name", "path", "role"} objects with role
    "candidate" or "target"; relative paths resolve against the manifest's
    directory. Candidates must be fully labeled. Returns (role, corpus)
    pairs in manifest order.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ValueError(f"manifest {path} must be a JSON list")
    out = []
    seen = set()
    for entry in entries:
        name, role = entry.get("name"), entry.get("role")
        if not name or role not in ("candidate", "target"):
            raise ValueError(f"manifest entry {entry!r}: need name and role candidate|target")
        if name in seen:
            raise ValueError(f"duplicate corpus name {name!r} in manifest")
        seen.add(name)
        corpus_path = Path(entry["path"])
        if not corpus_path.is_absolute():
            corpus_path = path.parent / corpus_path
        out.append((role, load_corpus(corpus_path, name, require_labels=role == "candidate")))
    return out


def stratified_folds(corpus: LabeledCorpus, spec: SplitSpec) -> list[tuple[set, set]]:
    """Split a fully labeled corpus into stratified CV folds.

    Returns ``fold_count`` (train_indices, test_indices) pairs whose test
    sets partition all document positions. Shuffling is keyed on
    (seed, document id), so the folds are a pure function of (corpus, spec)
    and invariant to document order.
    """
    if not corpus.fully_labeled:
        raise ValueError(f"stratified_folds requires labels on every document in {corpus.name!r}")
    by_class: dict[int, list[int]] = {0: [], 1: []}
    for pos, doc in enumerate(corpus.documents):
        by_class[doc.label].append(pos)
    if spec.fold_count > len(corpus.documents):
        raise ValueError(
            f"fold_count {spec.fold_count} exceeds document count in {corpus.name!r}"
        )
    test_sets: list[set] = [set() for _ in range(spec.fold_count)]
    counter = 0
    for label in (0, 1):
        members = sorted(
            by_class[label],
            key=lambda pos: (derive_seed(spec.seed, corpus.documents[pos].id), corpus.documents[pos].id),
        )
        for pos in members:
            test_sets[counter % spec.fold_count].add(pos)
            counter += 1
    all_indices = set(range(len(corpus.documents)))
    return [(all_indices - test, test) for test in test_sets]
