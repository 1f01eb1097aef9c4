"""Statistical distances between domain marginals.

Four measures are computed between a source and a target domain:

* chi-square divergence and KL divergence on smoothed top-K feature
  histograms (both asymmetric, evaluated source -> target),
* Maximum Mean Discrepancy with a Gaussian RBF kernel on TF-IDF document
  vectors restricted to the shared support,
* Earth Mover's Distance between the matched-budget histograms. Under the
  default binary ground metric this equals total variation and is computed
  by the closed form 0.5 * ||p - q||_1; a custom ground matrix routes
  through the transportation linear program.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from .corpus import LabeledCorpus
from .features import (
    DocVectorMatrix,
    FeatureDistribution,
    Vocabulary,
    feature_distribution,
    ngrams,
    tfidf_vectorize,
    top_k_support,
)
from .seeding import derive_seed


@dataclass(frozen=True)
class DistanceConfig:
    """Smoothing constants, MMD kernel settings, and the EMD ground metric.

    ``mmd_sigma=None`` selects the median heuristic (median pairwise
    distance over the pooled sample). Lambdas of exactly 0 are permitted so
    unsmoothed divergences can be evaluated; the pipeline defaults are the
    strictly positive 0.05 / 1e-5.
    """

    chi2_lambda: float = 0.05
    kld_lambda: float = 1e-5
    mmd_sigma: float | None = None
    mmd_max_samples: int = 5000
    ground_metric: str = "binary"
    ground_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.chi2_lambda < 0 or self.kld_lambda < 0:
            raise ValueError("smoothing lambdas must be >= 0")
        if self.mmd_max_samples < 2:
            raise ValueError("mmd_max_samples must be >= 2")
        if self.mmd_sigma is not None and self.mmd_sigma <= 0:
            raise ValueError("mmd_sigma must be positive when given")
        if self.ground_metric not in ("binary", "custom"):
            raise ValueError(f"unknown ground_metric {self.ground_metric!r}")
        if self.ground_metric == "custom":
            g = np.asarray(self.ground_matrix, dtype=np.float64)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ValueError("custom ground matrix must be square")
            if np.any(g < 0) or np.any(np.diag(g) != 0) or not np.array_equal(g, g.T):
                raise ValueError("ground matrix must be non-negative, symmetric, with zero diagonal")
            object.__setattr__(self, "ground_matrix", g)


@dataclass(frozen=True)
class DistanceVector:
    """The four distances for one ordered (source, target) pair."""

    chi2: float
    mmd: float
    emd: float
    kld: float
    degenerate_flags: frozenset = frozenset()

    def __post_init__(self):
        for name in ("chi2", "mmd", "emd", "kld"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        object.__setattr__(self, "degenerate_flags", frozenset(self.degenerate_flags))


def smooth(p: FeatureDistribution, lam: float) -> FeatureDistribution:
    """Additive smoothing: mass_i -> (mass_i + lam) / (1 + K * lam)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return p
    k = len(p.support)
    return FeatureDistribution(p.support, (p.mass + lam) / (1.0 + k * lam), p.token_total)


def _require_shared_support(p: FeatureDistribution, q: FeatureDistribution) -> None:
    if p.support != q.support:
        raise ValueError("distributions must share an identical, identically ordered support")


def chi2_divergence(p: FeatureDistribution, q: FeatureDistribution, cfg: DistanceConfig) -> float:
    """Chi-square divergence sum((p'-q')^2 / q') over smoothed histograms."""
    _require_shared_support(p, q)
    pm, qm = smooth(p, cfg.chi2_lambda).mass, smooth(q, cfg.chi2_lambda).mass
    if np.any((qm == 0) & (pm > 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(qm > 0, (pm - qm) ** 2 / np.where(qm > 0, qm, 1.0), 0.0)
    return float(terms.sum())


def kl_divergence(p: FeatureDistribution, q: FeatureDistribution, cfg: DistanceConfig) -> float:
    """KL divergence sum(p' * ln(p'/q')) over smoothed histograms (natural log)."""
    _require_shared_support(p, q)
    pm, qm = smooth(p, cfg.kld_lambda).mass, smooth(q, cfg.kld_lambda).mass
    if np.any((qm == 0) & (pm > 0)):
        return math.inf
    pos = pm > 0
    return float(np.sum(pm[pos] * np.log(pm[pos] / qm[pos])))


def _as_rows(samples) -> np.ndarray:
    if isinstance(samples, DocVectorMatrix):
        return samples.dense()
    return np.ascontiguousarray(np.asarray(samples, dtype=np.float64))


def _seeded_subset(rows: np.ndarray, size: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    keep = np.sort(rng.choice(rows.shape[0], size=size, replace=False))
    return rows[keep]


def _mmd_with_flags(samples_a, samples_b, cfg: DistanceConfig, seed: int) -> tuple[float, set]:
    a, b = _as_rows(samples_a), _as_rows(samples_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("mmd requires non-empty sample sets")
    flags: set = set()

    # Per-set subsample seeds derive from set content, not argument position,
    # so mmd(a, b) == mmd(b, a) for the same seed.
    def set_seed(rows: np.ndarray) -> int:
        return derive_seed(seed, rows.shape, rows.tobytes().hex())

    if a.shape[0] > cfg.mmd_max_samples:
        a = _seeded_subset(a, cfg.mmd_max_samples, set_seed(a))
    if b.shape[0] > cfg.mmd_max_samples:
        b = _seeded_subset(b, cfg.mmd_max_samples, set_seed(b))
    n = min(a.shape[0], b.shape[0])
    if a.shape[0] > n:
        a = _seeded_subset(a, n, set_seed(a))
    if b.shape[0] > n:
        b = _seeded_subset(b, n, set_seed(b))

    pooled = np.vstack([a, b])
    d2 = cdist(pooled, pooled, "sqeuclidean")
    if cfg.mmd_sigma is not None:
        sigma = cfg.mmd_sigma
    else:
        iu = np.triu_indices(pooled.shape[0], k=1)
        sigma = float(np.median(np.sqrt(d2[iu]))) if iu[0].size else 0.0
    if sigma == 0.0:
        flags.add("mmd_zero_bandwidth")
        return 0.0, flags
    gram = np.exp(-d2 / (2.0 * sigma * sigma))
    kaa = gram[:n, :n].mean()
    kbb = gram[n:, n:].mean()
    kab = gram[:n, n:].mean()
    return math.sqrt(max(0.0, kaa + kbb - 2.0 * kab)), flags


def mmd(samples_a, samples_b, cfg: DistanceConfig, seed: int = 0) -> float:
    """Biased V-statistic MMD estimate with a Gaussian RBF kernel.

    Each sample set is capped at ``mmd_max_samples`` rows and the larger set
    is subsampled to the smaller one's size (seeded, deterministic), then

        MMD = sqrt(max(0, mean k(a,a') + mean k(b,b') - 2 mean k(a,b)))

    with k(x,y) = exp(-||x-y||^2 / (2 sigma^2)). If the bandwidth degenerates
    to 0 (e.g. all points identical), the distance is 0.
    """
    value, _ = _mmd_with_flags(samples_a, samples_b, cfg, seed)
    return value


def _transport_lp(p: np.ndarray, q: np.ndarray, ground: np.ndarray) -> float:
    k = len(p)
    c = ground.reshape(-1)
    a_eq = np.zeros((2 * k, k * k))
    for i in range(k):
        a_eq[i, i * k:(i + 1) * k] = 1.0  # row sums = p
        a_eq[k + i, i::k] = 1.0  # column sums = q
    b_eq = np.concatenate([p, q])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed (status {res.status}): {res.message}")
    return float(res.fun)


def emd(p: FeatureDistribution, q: FeatureDistribution, cfg: DistanceConfig) -> float:
    """Earth Mover's Distance between two shared-support histograms.

    The binary ground metric equals total variation and is computed as
    0.5 * ||p - q||_1; a custom ground matrix solves the transportation LP.
    """
    _require_shared_support(p, q)
    if cfg.ground_metric == "binary":
        return 0.5 * float(np.abs(p.mass - q.mass).sum())
    ground = cfg.ground_matrix
    if ground.shape[0] != len(p.support):
        raise ValueError(
            f"ground matrix is {ground.shape[0]}x{ground.shape[0]} but support has {len(p.support)} features"
        )
    return _transport_lp(p.mass, q.mass, ground)


def load_ground_matrix(path) -> np.ndarray:
    """Read a K x K non-negative ground matrix from CSV (no header)."""
    with open(path, encoding="utf-8") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.asarray(rows, dtype=np.float64)


def _pair_support_vectors(
    source: LabeledCorpus, target: LabeledCorpus, support
) -> tuple[DocVectorMatrix, DocVectorMatrix]:
    """TF-IDF rows over the shared support, weighted by pooled-pair idf."""
    df = np.zeros(len(support), dtype=np.int64)
    index = {t: i for i, t in enumerate(support)}
    for corpus in (source, target):
        for doc in corpus.documents:
            for gram in {g for g in ngrams(doc.tokens) if g in index}:
                df[index[gram]] += 1
    vocab = Vocabulary(tuple(support), df, len(source) + len(target))
    return tfidf_vectorize(source, vocab), tfidf_vectorize(target, vocab)


def distance_vector(
    source: LabeledCorpus,
    target: LabeledCorpus,
    cfg: DistanceConfig,
    k: int,
    seed: int,
) -> DistanceVector:
    """All four distances for an ordered (source, target) pair.

    Builds the shared top-k support, matches histogram token budgets to the
    smaller corpus, and evaluates chi2/kld/emd on the histograms and MMD on
    the support-restricted TF-IDF rows. The asymmetric divergences are taken
    source -> target.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("distance_vector requires non-empty corpora")
    support = top_k_support(source, target, k)
    raw_s = feature_distribution(source, support)
    raw_t = feature_distribution(target, support)
    budget = min(raw_s.token_total, raw_t.token_total)
    dist_s, dist_t = raw_s, raw_t
    if raw_s.token_total > budget:
        dist_s = feature_distribution(source, support, budget, derive_seed(seed, "hist", source.name))
    if raw_t.token_total > budget:
        dist_t = feature_distribution(target, support, budget, derive_seed(seed, "hist", target.name))

    flags: set = set()
    if dist_s.token_total == 0:
        flags.add("uniform_fallback_source")
    if dist_t.token_total == 0:
        flags.add("uniform_fallback_target")

    rows_s, rows_t = _pair_support_vectors(source, target, support)
    mmd_value, mmd_flags = _mmd_with_flags(rows_s, rows_t, cfg, derive_seed(seed, "mmd"))
    flags |= mmd_flags

    return DistanceVector(
        chi2=chi2_divergence(dist_s, dist_t, cfg),
        mmd=mmd_value,
        emd=emd(dist_s, dist_t, cfg),
        kld=kl_divergence(dist_s, dist_t, cfg),
        degenerate_flags=frozenset(flags),
    )


def export_distance_matrix_csv(rows, path) -> None:
    """Write "source,target,chi2,mmd,emd,kld,inner_error" rows to CSV.

    ``rows`` is an iterable of (source_name, target_name, DistanceVector,
    inner_error) tuples; they are written in the given order.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("source,target,chi2,mmd,emd,kld,inner_error\n")
        for source_name, target_name, dv, inner in rows:
            fh.write(
                f"{source_name},{target_name},{float(dv.chi2)!r},{float(dv.mmd)!r},"
                f"{float(dv.emd)!r},{float(dv.kld)!r},{float(inner)!r}\n"
            )
