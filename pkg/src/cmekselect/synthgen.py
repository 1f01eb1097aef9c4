"""Synthetic labeled corpora with a controllable domain-shift knob.

Domains share a neutral vocabulary; each domain's positive/negative
sentiment lexicons start from a reference lexicon and have a shift-fraction
of their words replaced by fresh domain-specific words. Cross-domain error
against the reference grows with shift by construction, which gives the
whole pipeline a ground truth to be checked against.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import Document, LabeledCorpus, save_corpus
from .seeding import derive_seed

SENTIMENT_RATE = 0.3
_LETTERS = np.array(list(string.ascii_lowercase))


@dataclass(frozen=True)
class DomainSpec:
    """Generator parameters for one synthetic domain."""

    seed: int = 0
    n_docs: int = 200
    doc_len_range: tuple[int, int] = (30, 70)
    vocab: int = 400
    n_sentiment_words: int = 20
    shift: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "doc_len_range", tuple(self.doc_len_range))
        if self.n_docs < 4 or self.n_docs % 2 != 0:
            raise ValueError("n_docs must be even and >= 4")
        lo, hi = self.doc_len_range
        if not 1 <= lo <= hi:
            raise ValueError("doc_len_range must satisfy 1 <= min <= max")
        if not 0.0 <= self.shift <= 1.0:
            raise ValueError(f"shift must be in [0, 1], got {self.shift}")
        if not 0.0 <= self.noise <= 0.5:
            raise ValueError(f"noise must be in [0, 0.5], got {self.noise}")
        if self.vocab < 1 or self.n_sentiment_words < 1:
            raise ValueError("vocab and n_sentiment_words must be >= 1")


def _fresh_words(rng: np.random.Generator, count: int, taken: set) -> list[str]:
    words = []
    while len(words) < count:
        length = int(rng.integers(4, 9))
        word = "".join(rng.choice(_LETTERS, size=length))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def _generate_domain(spec: DomainSpec, name: str, neutral, pos_lex, neg_lex) -> LabeledCorpus:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    half = spec.n_docs // 2
    lexicons = {0: np.array(neg_lex), 1: np.array(pos_lex)}
    neutral = np.array(neutral)
    docs = []
    lo, hi = spec.doc_len_range
    for i in range(spec.n_docs):
        true_label = 0 if i < half else 1
        length = int(rng.integers(lo, hi + 1))
        sentiment_mask = rng.random(length) < SENTIMENT_RATE
        tokens = np.where(
            sentiment_mask,
            rng.choice(lexicons[true_label], size=length),
            rng.choice(neutral, size=length),
        )
        label = true_label
        if spec.noise > 0 and rng.random() < spec.noise:
            label = 1 - label
        docs.append(Document(tuple(tokens), label, i))
    return LabeledCorpus(name, tuple(docs), provenance=f"synthgen seed={spec.seed}")


def generate_family(reference_seed: int, shifts, template: DomainSpec) -> list[LabeledCorpus]:
    """Generate one corpus per shift, all sharing a reference lexicon.

    A domain at shift s has round(s * n_sentiment_words) words of each
    polarity replaced (a seeded per-domain choice) with fresh words unique
    to that domain. Fully deterministic given the seeds.
    """
    shifts = list(shifts)
    if not shifts:
        raise ValueError("shifts must be non-empty")
    master = np.random.Generator(np.random.PCG64(derive_seed(reference_seed, "lexicon")))
    taken: set = set()
    neutral = _fresh_words(master, template.vocab, taken)
    pos_ref = _fresh_words(master, template.n_sentiment_words, taken)
    neg_ref = _fresh_words(master, template.n_sentiment_words, taken)

    corpora = []
    for i, shift in enumerate(shifts):
        spec = replace(template, shift=shift, seed=derive_seed(reference_seed, "domain", i))
        rng = np.random.Generator(np.random.PCG64(derive_seed(spec.seed, "lexshift")))
        n_replace = round(shift * template.n_sentiment_words)
        pos_lex, neg_lex = list(pos_ref), list(neg_ref)
        if n_replace > 0:
            fresh = _fresh_words(rng, 2 * n_replace, taken)
            for lex, fresh_part in ((pos_lex, fresh[:n_replace]), (neg_lex, fresh[n_replace:])):
                idx = sorted(rng.choice(template.n_sentiment_words, size=n_replace, replace=False))
                for j, word in zip(idx, fresh_part):
                    lex[j] = word
        name = f"synth{i:02d}-shift{shift:.2f}"
        corpora.append(_generate_domain(spec, name, neutral, pos_lex, neg_lex))
    return corpora


def load_family_spec(path) -> tuple[int, list[float], DomainSpec]:
    """Parse a generator spec file: reference_seed, shifts, and the template."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        reference_seed = int(obj["reference_seed"])
        shifts = [float(s) for s in obj["shifts"]]
        template = DomainSpec(shift=0.0, **{k: tuple(v) if k == "doc_len_range" else v
                                            for k, v in obj.get("template", {}).items()})
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid generator spec {path}: {exc}") from exc
    for s in shifts:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"shift must be in [0, 1], got {s}")
    return reference_seed, shifts, template


def write_family(corpora, reference_seed: int, shifts, template: DomainSpec, out_dir) -> list[Path]:
    """Write each corpus as JSONL plus a sidecar with all generator
    parameters and a manifest usable by the CLI."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    manifest = []
    for corpus in corpora:
        path = out_dir / f"{corpus.name}.jsonl"
        save_corpus(corpus, path)
        paths.append(path)
        manifest.append({"name": corpus.name, "path": path.name, "role": "candidate"})
    sidecar = {
        "reference_seed": reference_seed,
        "shifts": list(shifts),
        "template": {
            "n_docs": template.n_docs,
            "doc_len_range": list(template.doc_len_range),
            "vocab": template.vocab,
            "n_sentiment_words": template.n_sentiment_words,
            "noise": template.noise,
        },
    }
    sidecar_path = out_dir / "generator_params.json"
    with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(sidecar_path)
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    paths.append(manifest_path)
    return paths
