"""L2-regularized logistic regression over TF-IDF rows, plus inner-domain
(k-fold CV) and cross-domain error estimation.

The training objective is

    sum_i ln(1 + exp(-(2 y_i - 1) (x_i . w + b))) + (alpha / 2) ||w||^2

with an unregularized bias. Documents are canonically ordered before
fitting, so training is invariant to document order and bitwise
deterministic for a given (corpus, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .corpus import Document, LabeledCorpus, SplitSpec, stratified_folds
from .features import (
    DEFAULT_MAX_DF_FRACTION,
    DEFAULT_MIN_COUNT,
    Vocabulary,
    build_vocabulary,
    ngrams,
    tfidf_vectorize,
)


@dataclass(frozen=True)
class TrainConfig:
    """Regularization strength, optimizer budget, and the CV split seed."""

    alpha: float = 1.0
    max_iterations: int = 1000
    tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Hypothesis:
    """A fitted linear classifier: label 1 iff w.x + b > 0 on TF-IDF rows."""

    weights: np.ndarray
    bias: float
    vocab: Vocabulary
    converged: bool
    grad_norm: float
    n_iter: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.vocab),):
            raise ValueError("weights dimension must equal vocabulary size")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class ErrorEstimate:
    """An exact misclassification ratio: error = misclassified / n_evaluated."""

    error: float
    n_evaluated: int
    kind: str  # inner_cv | cross_domain | holdout


def _objective(theta, x_rows, y_signed, alpha):
    w, b = theta[:-1], theta[-1]
    margins = y_signed * (x_rows @ w + b)
    loss = float(np.sum(np.logaddexp(0.0, -margins))) + 0.5 * alpha * float(w @ w)
    s = expit(-margins)
    grad_w = -(x_rows.T @ (y_signed * s)) + alpha * w
    grad_b = -float(np.sum(y_signed * s))
    return loss, np.concatenate([np.asarray(grad_w).ravel(), [grad_b]])


def _hessp(theta, v, x_rows, y_signed, alpha):
    w, b = theta[:-1], theta[-1]
    margins = y_signed * (x_rows @ w + b)
    d2 = expit(-margins) * expit(margins)
    u = d2 * (x_rows @ v[:-1] + v[-1])
    hv_w = np.asarray(x_rows.T @ u).ravel() + alpha * v[:-1]
    return np.concatenate([hv_w, [float(np.sum(u))]])


def fit_logistic(x_rows, y01, cfg: TrainConfig, debug: bool = False):
    """Minimize the regularized logistic loss over rows ``x_rows``.

    Runs L-BFGS-B and, if the gradient has not reached ``cfg.tolerance``
    (inf-norm) within the iteration budget, polishes with a trust-region
    Newton method using Hessian-vector products. Returns
    (weights, bias, info) where info carries convergence diagnostics and,
    in debug mode, the per-iteration objective history (asserted to be
    non-increasing).
    """
    y_signed = 2.0 * np.asarray(y01, dtype=np.float64) - 1.0
    n_features = x_rows.shape[1]
    theta0 = np.zeros(n_features + 1)
    args = (x_rows, y_signed, cfg.alpha)
    history: list[float] = []

    callback = None
    if debug:
        history.append(_objective(theta0, *args)[0])

        def callback(xk):
            history.append(_objective(xk, *args)[0])

    res = minimize(
        _objective,
        theta0,
        args=args,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": cfg.max_iterations, "gtol": cfg.tolerance, "ftol": 1e-15},
    )
    theta, n_iter = res.x, res.nit
    grad_norm = float(np.max(np.abs(_objective(theta, *args)[1])))
    if grad_norm > cfg.tolerance and n_iter < cfg.max_iterations:
        res = minimize(
            _objective,
            theta,
            args=args,
            jac=True,
            hessp=_hessp,
            method="trust-ncg",
            callback=callback,
            options={"maxiter": cfg.max_iterations - n_iter, "gtol": cfg.tolerance},
        )
        theta = res.x
        n_iter += res.nit
        grad_norm = float(np.max(np.abs(_objective(theta, *args)[1])))

    if debug:
        for prev, cur in zip(history, history[1:]):
            assert cur <= prev * (1 + 1e-12) + 1e-12, "objective increased during optimization"

    info = {
        "converged": grad_norm <= cfg.tolerance,
        "grad_norm": grad_norm,
        "n_iter": int(n_iter),
        "objective_history": history,
    }
    return theta[:-1], float(theta[-1]), info


def _canonical_order(corpus: LabeledCorpus) -> LabeledCorpus:
    docs = sorted(corpus.documents, key=lambda d: (d.tokens, d.label))
    return LabeledCorpus(corpus.name, tuple(docs), corpus.provenance)


def train(corpus: LabeledCorpus, cfg: TrainConfig, debug: bool = False) -> Hypothesis:
    """Fit the classifier on a fully labeled corpus (vocabulary and idf
    included), returning the hypothesis with convergence diagnostics."""
    if not corpus.fully_labeled:
        raise ValueError(f"train requires labels on every document in {corpus.name!r}")
    counts = corpus.class_counts()
    if counts[0] == 0 or counts[1] == 0:
        raise ValueError(f"single-class corpus {corpus.name!r}: both classes are required")
    canon = _canonical_order(corpus)
    vocab = build_vocabulary(canon, DEFAULT_MIN_COUNT, DEFAULT_MAX_DF_FRACTION)
    x_rows = tfidf_vectorize(canon, vocab).rows
    y01 = np.array([d.label for d in canon.documents], dtype=np.float64)
    weights, bias, info = fit_logistic(x_rows, y01, cfg, debug=debug)
    return Hypothesis(weights, bias, vocab, info["converged"], info["grad_norm"], info["n_iter"])


def _doc_vector(doc: Document, vocab: Vocabulary) -> np.ndarray:
    x = np.zeros(len(vocab))
    for gram in ngrams(doc.tokens):
        i = vocab.index.get(gram)
        if i is not None:
            x[i] += 1.0
    x *= vocab.idf()
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def classify(h: Hypothesis, doc: Document) -> int:
    """1 iff w.x + b > 0 for the document's TF-IDF row; OOV tokens ignored."""
    return int(float(h.weights @ _doc_vector(doc, h.vocab)) + h.bias > 0)


def evaluate(h: Hypothesis, corpus: LabeledCorpus, kind: str = "cross_domain") -> ErrorEstimate:
    """Exact 0/1 error of a hypothesis on a fully labeled corpus."""
    if not corpus.fully_labeled:
        raise ValueError("cross_error requires labels on every target document")
    x_rows = tfidf_vectorize(corpus, h.vocab).rows
    predicted = (x_rows @ h.weights + h.bias > 0).astype(int)
    actual = np.array([d.label for d in corpus.documents])
    wrong = int(np.sum(predicted != actual))
    return ErrorEstimate(wrong / len(corpus), len(corpus), kind)


def inner_error(corpus: LabeledCorpus, cfg: TrainConfig, folds: int = 10) -> ErrorEstimate:
    """Stratified k-fold CV error; vocabulary and idf are refit per fold on
    the training folds only."""
    min_class = min(corpus.class_counts().values())
    if folds > min_class:
        raise ValueError(
            f"fold_count {folds} exceeds smallest class count {min_class} in {corpus.name!r}"
        )
    splits = stratified_folds(corpus, SplitSpec(folds, cfg.seed))
    wrong = 0
    for fold_i, (train_idx, test_idx) in enumerate(splits):
        sub = corpus.subset(sorted(train_idx), name=f"{corpus.name}#fold{fold_i}")
        h = train(sub, cfg)
        for i in sorted(test_idx):
            if classify(h, corpus.documents[i]) != corpus.documents[i].label:
                wrong += 1
    return ErrorEstimate(wrong / len(corpus), len(corpus), "inner_cv")


def cross_error(source: LabeledCorpus, target: LabeledCorpus, cfg: TrainConfig) -> ErrorEstimate:
    """Train on all of source, evaluate the exact 0/1 error on all of target."""
    return evaluate(train(source, cfg), target, kind="cross_domain")


def save_hypothesis(h: Hypothesis, path) -> None:
    """Serialize a hypothesis (terms, idf, weights, bias) for audits."""
    payload = {
        "terms": list(h.vocab.terms),
        "doc_freq": [int(v) for v in h.vocab.doc_freq],
        "n_docs": h.vocab.n_docs,
        "idf": [float(v) for v in h.vocab.idf()],
        "weights": [float(v) for v in h.weights],
        "bias": h.bias,
        "converged": h.converged,
        "grad_norm": h.grad_norm,
        "n_iter": h.n_iter,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_hypothesis(path) -> Hypothesis:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    vocab = Vocabulary(tuple(payload["terms"]), np.array(payload["doc_freq"]), payload["n_docs"])
    return Hypothesis(
        np.array(payload["weights"]),
        payload["bias"],
        vocab,
        payload["converged"],
        payload["grad_norm"],
        payload["n_iter"],
    )
