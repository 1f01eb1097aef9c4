"""The CMEK selection model.

Each candidate source domain is scored against a target by a learned
non-negative linear combination of six features:

    [chi2, mmd, emd, kld, source inner-domain error, 1.0]

The weights are fit by least-absolute-deviation regression (an exact linear
program) on leave-one-out pairs built from the candidate set alone, so the
target's labels are never consulted. The candidate with the lowest predicted
cross-domain error is selected for training.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .classifier import Hypothesis, TrainConfig, evaluate, inner_error, train
from .corpus import Document, LabeledCorpus
from .distances import DistanceConfig, DistanceVector, distance_vector
from .seeding import derive_seed

FEATURE_ORDER = ("chi2", "mmd", "emd", "kld", "inner_error", "const")


@dataclass(frozen=True)
class DistanceFeatureVector:
    """The 6-feature vector for one ordered (source, target) pair."""

    values: np.ndarray
    source_name: str
    target_name: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (6,):
            raise ValueError("feature vector must have exactly 6 entries")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector entries must be finite")
        if np.any(v[:5] < 0):
            raise ValueError("distance and inner-error features must be >= 0")
        if v[5] != 1.0:
            raise ValueError("constant slot must be exactly 1.0")


@dataclass(frozen=True)
class TrainingPair:
    """One LOO observation: features of (source, proxy-target) and the true
    cross-domain error measured on the labeled proxy."""

    features: DistanceFeatureVector
    true_error: float

    def __post_init__(self):
        if not 0.0 <= self.true_error <= 1.0:
            raise ValueError(f"true_error must be in [0, 1], got {self.true_error!r}")


@dataclass(frozen=True)
class PredictorWeights:
    """Fitted non-negative LAD coefficients in FEATURE_ORDER."""

    beta: np.ndarray
    objective: float
    n_pairs: int
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=np.float64)
        object.__setattr__(self, "beta", b)
        if b.shape != (6,):
            raise ValueError("beta must have exactly 6 entries")
        if np.any(b < 0):
            raise ValueError("beta must be entrywise non-negative")
        if self.objective < 0:
            raise ValueError("objective must be >= 0")


class DomainCache:
    """Memoizes the expensive per-corpus and per-pair quantities.

    One cache instance shared across a benchmark avoids refitting classifiers
    and recomputing distance vectors for pairs that recur across outer runs.
    Entries are keyed by corpus name (names are unique within a candidate
    set) and every value is a pure function of its inputs and the derived
    per-pair seed, so results are independent of call or worker order.
    """

    def __init__(self, dcfg: DistanceConfig, tcfg: TrainConfig, k: int, seed: int, fold_count: int = 10):
        self.dcfg = dcfg
        self.tcfg = tcfg
        self.k = k
        self.seed = seed
        self.fold_count = fold_count
        self._inner: dict[str, float] = {}
        self._hypothesis: dict[str, Hypothesis] = {}
        self._distance: dict[tuple[str, str], DistanceVector] = {}
        self._cross: dict[tuple[str, str], float] = {}

    def hypothesis(self, corpus: LabeledCorpus) -> Hypothesis:
        if corpus.name not in self._hypothesis:
            self._hypothesis[corpus.name] = train(corpus, self.tcfg)
        return self._hypothesis[corpus.name]

    def inner_error(self, corpus: LabeledCorpus) -> float:
        if corpus.name not in self._inner:
            self._inner[corpus.name] = inner_error(corpus, self.tcfg, self.fold_count).error
        return self._inner[corpus.name]

    def distance_vector(self, source: LabeledCorpus, target: LabeledCorpus) -> DistanceVector:
        key = (source.name, target.name)
        if key not in self._distance:
            pair_seed = derive_seed(self.seed, source.name, target.name)
            self._distance[key] = distance_vector(source, target, self.dcfg, self.k, pair_seed)
        return self._distance[key]

    def cross_error(self, source: LabeledCorpus, target: LabeledCorpus) -> float:
        key = (source.name, target.name)
        if key not in self._cross:
            self._cross[key] = evaluate(self.hypothesis(source), target).error
        return self._cross[key]

    def feature_vector(self, source: LabeledCorpus, target: LabeledCorpus) -> DistanceFeatureVector:
        dv = self.distance_vector(source, target)
        values = np.array([dv.chi2, dv.mmd, dv.emd, dv.kld, self.inner_error(source), 1.0])
        return DistanceFeatureVector(values, source.name, target.name)

    def warm(self, pairs, threads: int = 1) -> None:
        """Precompute feature vectors for (source, target) pairs, optionally
        in parallel; results are identical for any thread count."""
        pairs = list(pairs)
        if threads <= 1 or len(pairs) <= 1:
            for source, target in pairs:
                self.feature_vector(source, target)
            return
        sources = {s.name: s for s, _ in pairs if s.name not in self._inner}
        to_fit = {s.name: s for s, _ in pairs if s.name not in self._hypothesis}
        missing = [(s, t) for s, t in pairs if (s.name, t.name) not in self._distance]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # Corpus-level quantities first (avoids duplicate fits), then pairs.
            inner_futs = {n: pool.submit(inner_error, c, self.tcfg, self.fold_count) for n, c in sources.items()}
            hyp_futs = {n: pool.submit(train, c, self.tcfg) for n, c in to_fit.items()}
            for name, fut in inner_futs.items():
                self._inner[name] = fut.result().error
            for name, fut in hyp_futs.items():
                self._hypothesis[name] = fut.result()
            dist_futs = {
                (s.name, t.name): pool.submit(
                    distance_vector, s, t, self.dcfg, self.k, derive_seed(self.seed, s.name, t.name)
                )
                for s, t in missing
            }
            for key, fut in dist_futs.items():
                self._distance[key] = fut.result()

    def distance_flags(self) -> list[str]:
        """Sorted, pair-qualified degenerate flags seen so far."""
        out = []
        for (source_name, target_name), dv in self._distance.items():
            for flag in dv.degenerate_flags:
                out.append(f"{source_name}->{target_name}:{flag}")
        return sorted(out)


def _default_cache(dcfg, tcfg, k, seed, fold_count) -> DomainCache:
    return DomainCache(dcfg, tcfg, k, seed, fold_count)


def assemble_features(
    source: LabeledCorpus,
    target: LabeledCorpus,
    dcfg: DistanceConfig,
    tcfg: TrainConfig,
    k: int,
    seed: int,
    fold_count: int = 10,
    cache: DomainCache | None = None,
) -> DistanceFeatureVector:
    """Features for one ordered pair: the four distances (source -> target),
    the source's inner-domain CV error, and the constant 1.

    Only the target's marginal (token) information is used; its labels are
    never read.
    """
    cache = cache or _default_cache(dcfg, tcfg, k, seed, fold_count)
    return cache.feature_vector(source, target)


def build_loo_training_set(
    candidates,
    dcfg: DistanceConfig,
    tcfg: TrainConfig,
    k: int,
    seed: int,
    fold_count: int = 10,
    cache: DomainCache | None = None,
    threads: int = 1,
) -> list[TrainingPair]:
    """All N(N-1) ordered (source, proxy-target) pairs over the candidates.

    Each candidate in turn serves as the labeled proxy target; the true
    cross-domain error on the proxy is the regression target.
    """
    candidates = list(candidates)
    if len(candidates) < 3:
        raise ValueError("insufficient candidates for LOO fit (need >= 3)")
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ValueError("candidate names must be unique")
    cache = cache or _default_cache(dcfg, tcfg, k, seed, fold_count)
    ordered = [(s, t) for t in candidates for s in candidates if s.name != t.name]
    cache.warm(ordered, threads=threads)
    return [
        TrainingPair(cache.feature_vector(s, t), cache.cross_error(s, t))
        for s, t in ordered
    ]


def fit_weights(pairs) -> PredictorWeights:
    """Non-negative least-absolute-deviation fit, solved exactly as an LP.

    minimize   sum_i t_i
    subject to t_i >= xi_i - beta . s_i,  t_i >= -(xi_i - beta . s_i),
               beta >= 0, t >= 0

    Any optimal vertex is accepted; LAD solutions can be non-unique, which
    is probed and recorded in the diagnostics.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("fit_weights requires at least one training pair")
    s_mat = np.vstack([p.features.values for p in pairs])
    xi = np.array([p.true_error for p in pairs])
    n, m = s_mat.shape
    c = np.concatenate([np.zeros(m), np.ones(n)])
    eye = np.eye(n)
    a_ub = np.vstack([np.hstack([-s_mat, -eye]), np.hstack([s_mat, -eye])])
    b_ub = np.concatenate([-xi, xi])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LAD linear program failed (status {res.status}): {res.message}")
    beta = np.clip(res.x[:m], 0.0, None)
    objective = float(res.fun)

    # Probe non-uniqueness: among optimal solutions, minimize sum(beta).
    probe = linprog(
        np.concatenate([np.ones(m), np.zeros(n)]),
        A_ub=np.vstack([a_ub, c]),
        b_ub=np.concatenate([b_ub, [objective + 1e-9]]),
        method="highs",
    )
    non_unique = bool(probe.status == 0 and np.max(np.abs(np.clip(probe.x[:m], 0, None) - beta)) > 1e-6)
    return PredictorWeights(
        beta,
        objective,
        n,
        diagnostics={"non_unique": non_unique, "lp_status": int(res.status)},
    )


def predict(weights: PredictorWeights, features: DistanceFeatureVector) -> float:
    """Predicted cross-domain error beta . s (always >= 0)."""
    return float(weights.beta @ features.values)


def select(
    weights: PredictorWeights,
    candidates,
    target: LabeledCorpus,
    n: int,
    dcfg: DistanceConfig,
    tcfg: TrainConfig,
    k: int,
    seed: int,
    fold_count: int = 10,
    cache: DomainCache | None = None,
) -> list[tuple[str, float]]:
    """Rank candidates by predicted error against the target and return the
    best n as (name, predicted_error), ties broken by name."""
    candidates = list(candidates)
    if not 1 <= n <= len(candidates):
        raise ValueError(f"n must be in [1, {len(candidates)}], got {n}")
    cache = cache or _default_cache(dcfg, tcfg, k, seed, fold_count)
    scored = [
        (predict(weights, cache.feature_vector(c, target)), c.name) for c in candidates
    ]
    scored.sort()
    return [(name, pred) for pred, name in scored[:n]]


def union_corpus(corpora) -> LabeledCorpus:
    """Concatenate corpora in the given order, re-assigning document ids."""
    corpora = list(corpora)
    if not corpora:
        raise ValueError("union_corpus requires at least one corpus")
    docs = []
    for corpus in corpora:
        for doc in corpus.documents:
            docs.append(Document(doc.tokens, doc.label, len(docs)))
    name = "+".join(c.name for c in corpora)
    return LabeledCorpus(name, tuple(docs), provenance="union")
