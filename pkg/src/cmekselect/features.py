"""Bag-of-words machinery: vocabularies over unigrams+bigrams, TF-IDF
document vectors, and top-K token-frequency histograms used as empirical
marginal distributions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .corpus import LabeledCorpus
from .seeding import derive_seed

DEFAULT_MIN_COUNT = 4
DEFAULT_MAX_DF_FRACTION = 0.40


def ngrams(tokens) -> list[str]:
    """Unigrams plus space-joined bigrams, in document order."""
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return grams


@dataclass(frozen=True)
class Vocabulary:
    """Lexicographically ordered feature set with document frequencies.

    ``n_docs`` is the size of the corpus the vocabulary (and hence the idf)
    was fit on.
    """

    terms: tuple[str, ...]
    doc_freq: np.ndarray
    n_docs: int
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "doc_freq", np.asarray(self.doc_freq, dtype=np.int64))
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency: 1 + ln((1+N) / (1+df))."""
        return 1.0 + np.log((1.0 + self.n_docs) / (1.0 + self.doc_freq))


@dataclass(frozen=True)
class DocVectorMatrix:
    """One sparse row per document over a fixed vocabulary."""

    rows: sparse.csr_matrix
    weighting: str  # "raw" or "tfidf"

    @property
    def shape(self):
        return self.rows.shape

    def dense(self) -> np.ndarray:
        return np.asarray(self.rows.todense())


def build_vocabulary(
    corpus: LabeledCorpus,
    min_count: int = DEFAULT_MIN_COUNT,
    max_df_fraction: float = DEFAULT_MAX_DF_FRACTION,
) -> Vocabulary:
    """Collect every unigram/bigram with total count > ``min_count`` and
    document frequency <= ``max_df_fraction`` of the corpus.

    Both thresholds follow the pipeline defaults; the count cut is strict
    (a feature seen exactly ``min_count`` times is dropped).
    """
    if len(corpus) == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if not 0 < max_df_fraction <= 1:
        raise ValueError(f"max_df_fraction must be in (0, 1], got {max_df_fraction}")
    counts: Counter = Counter()
    df: Counter = Counter()
    for doc in corpus.documents:
        grams = ngrams(doc.tokens)
        counts.update(grams)
        df.update(set(grams))
    max_df = max_df_fraction * len(corpus)
    terms = sorted(t for t, c in counts.items() if c > min_count and df[t] <= max_df)
    if not terms:
        raise ValueError(f"no features survive thresholds in {corpus.name!r}")
    return Vocabulary(tuple(terms), np.array([df[t] for t in terms]), len(corpus))


def count_rows(corpus: LabeledCorpus, vocab: Vocabulary) -> sparse.csr_matrix:
    """Raw per-document counts of the vocabulary's terms."""
    data, indices, indptr = [], [], [0]
    for doc in corpus.documents:
        seen: Counter = Counter(g for g in ngrams(doc.tokens) if g in vocab.index)
        for col in sorted(vocab.index[t] for t in seen):
            indices.append(col)
            data.append(float(seen[vocab.terms[col]]))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
        shape=(len(corpus), len(vocab)),
    )


def tfidf_vectorize(corpus: LabeledCorpus, vocab: Vocabulary) -> DocVectorMatrix:
    """TF-IDF rows: count * (1 + ln((1+N)/(1+df))), then L2-normalize each row.

    Rows with no in-vocabulary tokens stay zero.
    """
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    rows = count_rows(corpus, vocab) @ sparse.diags(vocab.idf())
    norms = np.sqrt(np.asarray(rows.multiply(rows).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    rows = sparse.diags(scale) @ rows
    return DocVectorMatrix(rows.tocsr(), "tfidf")


def top_k_support(corpus_a: LabeledCorpus, corpus_b: LabeledCorpus, k: int) -> tuple[str, ...]:
    """The k features with the highest summed raw count over both corpora.

    Ties break lexicographically; if fewer than k distinct features exist
    they are all returned.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts: Counter = Counter()
    for corpus in (corpus_a, corpus_b):
        for doc in corpus.documents:
            counts.update(ngrams(doc.tokens))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return tuple(t for t, _ in ranked[:k])


@dataclass(frozen=True)
class FeatureDistribution:
    """Probability vector over a fixed, ordered feature support.

    ``token_total`` is the number of support tokens the masses were computed
    from (0 marks the uniform fallback for corpora with no support hits).
    """

    support: tuple[str, ...]
    mass: np.ndarray
    token_total: int

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        mass = np.asarray(self.mass, dtype=np.float64)
        object.__setattr__(self, "mass", mass)
        if mass.shape != (len(self.support),):
            raise ValueError("mass length must match support length")
        if np.any(mass < 0):
            raise ValueError("mass entries must be non-negative")
        if abs(float(mass.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mass must sum to 1, got {mass.sum()!r}")


def feature_distribution(
    corpus: LabeledCorpus,
    support,
    token_budget: int | None = None,
    seed: int = 0,
) -> FeatureDistribution:
    """Empirical distribution of the support features over a corpus.

    When ``token_budget`` is given and the corpus holds more support tokens
    than the budget, the token multiset is subsampled uniformly without
    replacement (seeded) down to the budget before normalizing; this is how
    document lengths are matched between two domains. A corpus with no
    support hits falls back to the uniform distribution.
    """
    support = tuple(support)
    if not support:
        raise ValueError("support must be non-empty")
    index = {t: i for i, t in enumerate(support)}
    counts = np.zeros(len(support), dtype=np.int64)
    for doc in corpus.documents:
        for gram in ngrams(doc.tokens):
            i = index.get(gram)
            if i is not None:
                counts[i] += 1
    total = int(counts.sum())
    if token_budget is not None and total > token_budget:
        rng = np.random.Generator(np.random.PCG64(seed))
        counts = rng.multivariate_hypergeometric(counts, token_budget)
        total = token_budget
    if total == 0:
        mass = np.full(len(support), 1.0 / len(support))
    else:
        mass = counts / total
    return FeatureDistribution(support, mass, total)


def pair_histogram_budget(corpus_a: LabeledCorpus, corpus_b: LabeledCorpus, support) -> int:
    """Matched token budget for a pair: the smaller support-token total."""
    return min(
        feature_distribution(corpus_a, support).token_total,
        feature_distribution(corpus_b, support).token_total,
    )


def export_pair_csv(dist_a: FeatureDistribution, dist_b: FeatureDistribution, path) -> None:
    """Debug artifact: the two masses of a compared pair, one feature per row."""
    if dist_a.support != dist_b.support:
        raise ValueError("distributions must share support")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,mass_a,mass_b\n")
        for feat, ma, mb in zip(dist_a.support, dist_a.mass, dist_b.mass):
            fh.write(f'"{feat}",{float(ma)!r},{float(mb)!r}\n')


def pair_seed(global_seed: int, name_a: str, name_b: str) -> int:
    """Seed for a (source, target) pair, independent of scheduling order."""
    return derive_seed(global_seed, name_a, name_b)
