"""Evaluation protocol: outer leave-one-out over corpora, comparing CMEK
selection against the analytic random baseline, the optimal selection, and
training on all candidate domains; paired t-tests and CSV/JSON reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .classifier import TrainConfig, evaluate
from .cmek import DomainCache, build_loo_training_set, fit_weights, predict, union_corpus
from .corpus import LabeledCorpus
from .distances import DistanceConfig
from .seeding import derive_seed

WORST_K = 5


@dataclass(frozen=True)
class RunResult:
    """One outer-LOO run: a single held-out target domain."""

    target_name: str
    per_candidate_true_error: dict
    per_candidate_predicted: dict
    selected: tuple[str, ...]
    relative_error: float
    all_domains_error: float

    def __post_init__(self):
        if self.relative_error < 0:
            raise ValueError("relative_error must be >= 0")


@dataclass(frozen=True)
class RandomAggregate:
    """Analytic uniform-selection baseline, averaged over runs."""

    avg_abs_error: float
    prob_best: float
    prob_worst5: float | None


@dataclass(frozen=True)
class TTestResult:
    comparison: str
    t: float
    p: float
    normality: float


@dataclass(frozen=True)
class SelectionReport:
    runs: tuple[RunResult, ...]
    prob_best: float
    prob_worst5: float | None
    avg_abs_error: float
    random_baseline: RandomAggregate
    topn_curve: tuple[tuple[int, float, float, float], ...]
    ttests: tuple[TTestResult, ...]
    degenerate_flags: tuple[str, ...] = ()


def random_baseline(per_candidate_true_error: dict, worst_k: int = WORST_K):
    """Exact aggregates of selecting one candidate uniformly at random.

    Returns (avg_error, prob_best, prob_worstk); no sampling is involved.
    ``prob_worstk`` counts candidates whose error ties with or exceeds the
    k-th largest.
    """
    if not per_candidate_true_error:
        raise ValueError("per_candidate_true_error must be non-empty")
    errors = np.array(list(per_candidate_true_error.values()), dtype=np.float64)
    n = len(errors)
    avg = float(errors.mean())
    prob_best = float(np.sum(errors == errors.min()) / n)
    kk = min(worst_k, n)
    threshold = np.sort(errors)[::-1][kk - 1]
    prob_worstk = float(np.sum(errors >= threshold) / n)
    return avg, prob_best, prob_worstk


def _worst_k_threshold(errors: np.ndarray, worst_k: int = WORST_K) -> float:
    kk = min(worst_k, len(errors))
    return float(np.sort(errors)[::-1][kk - 1])


def paired_ttest(a, b):
    """Two-sided paired t-test plus a Jarque-Bera normality statistic.

    Returns (t, p, normality) for the differences d = a - b with n-1 degrees
    of freedom; p comes from the regularized incomplete beta function. The
    normality statistic is reported, never used to gate results.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 3:
        raise ValueError("paired_ttest requires two equal-length series with >= 3 entries")
    d = a - b
    n = len(d)
    mean = float(d.mean())
    var = float(d.var(ddof=1))
    if var == 0.0:
        raise ValueError("degenerate t-test: paired differences have zero variance")
    t = mean / math.sqrt(var / n)
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    centered = d - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    skew = m3 / m2**1.5
    kurt = m4 / m2**2
    normality = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    return t, p, normality


def outer_loo_benchmark(
    corpora,
    dcfg: DistanceConfig,
    tcfg: TrainConfig,
    k: int,
    seed: int,
    fold_count: int = 10,
    topn_max: int | None = None,
    topn_random_draws: int = 20,
    threads: int = 1,
    override_predictions=None,
) -> SelectionReport:
    """Hold out each corpus in turn, fit CMEK on the rest, select, and score.

    Target labels are consulted only when scoring the true cross-domain
    errors of the candidates; fitting and selection see the target's
    marginal only. ``override_predictions(source, target) -> float``
    replaces the fitted predictor (used to inject oracle predictions).
    ``topn_max`` additionally evaluates training on the union of the best n
    candidates for n = 1..topn_max against seeded random n-subsets and the
    all-domains union.
    """
    corpora = list(corpora)
    n_domains = len(corpora)
    if n_domains < 4:
        raise ValueError("outer LOO benchmark requires at least 4 corpora")
    names = [c.name for c in corpora]
    if len(set(names)) != len(names):
        raise ValueError("corpus names must be unique")
    if topn_max is not None and not 1 <= topn_max <= n_domains - 1:
        raise ValueError(f"topn_max must be in [1, {n_domains - 1}]")

    cache = DomainCache(dcfg, tcfg, k, seed, fold_count)
    runs = []
    random_avgs, random_bests, random_worsts = [], [], []
    topn_rows: dict[int, dict[str, list[float]]] = {}

    for target in corpora:
        candidates = [c for c in corpora if c.name != target.name]
        if override_predictions is None:
            pairs = build_loo_training_set(
                candidates, dcfg, tcfg, k, seed, fold_count, cache=cache, threads=threads
            )
            weights = fit_weights(pairs)
            cache.warm([(c, target) for c in candidates], threads=threads)
            predicted = {c.name: predict(weights, cache.feature_vector(c, target)) for c in candidates}
        else:
            predicted = {c.name: float(override_predictions(c, target)) for c in candidates}
        ranking = sorted(candidates, key=lambda c: (predicted[c.name], c.name))
        true_errors = {c.name: cache.cross_error(c, target) for c in candidates}
        best_error = min(true_errors.values())
        selected_error = true_errors[ranking[0].name]
        all_union = union_corpus(candidates)
        all_error = evaluate(cache.hypothesis(all_union), target).error

        runs.append(
            RunResult(
                target_name=target.name,
                per_candidate_true_error=dict(sorted(true_errors.items())),
                per_candidate_predicted=dict(sorted(predicted.items())),
                selected=tuple(c.name for c in ranking),
                relative_error=selected_error - best_error,
                all_domains_error=all_error,
            )
        )
        r_avg, r_best, r_worst = random_baseline(true_errors)
        random_avgs.append(r_avg)
        random_bests.append(r_best)
        random_worsts.append(r_worst)

        if topn_max is not None:
            by_name = {c.name: c for c in candidates}
            rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "topn", target.name)))
            sorted_names = sorted(by_name)
            for n_sel in range(1, topn_max + 1):
                cmek_err = evaluate(cache.hypothesis(union_corpus(ranking[:n_sel])), target).error
                draw_errors = []
                for _ in range(topn_random_draws):
                    chosen = sorted(rng.choice(len(sorted_names), size=n_sel, replace=False))
                    subset = [by_name[sorted_names[i]] for i in chosen]
                    draw_errors.append(evaluate(cache.hypothesis(union_corpus(subset)), target).error)
                row = topn_rows.setdefault(n_sel, {"cmek": [], "random": [], "all": []})
                row["cmek"].append(cmek_err)
                row["random"].append(float(np.mean(draw_errors)))
                row["all"].append(all_error)

    per_run_errors = np.array([r.per_candidate_true_error[r.selected[0]] for r in runs])
    per_run_best = np.array([min(r.per_candidate_true_error.values()) for r in runs])
    prob_best = float(np.mean(per_run_errors == per_run_best))
    n_candidates = n_domains - 1
    if n_candidates <= WORST_K:
        prob_worst5 = None
        random_worst_agg = None
    else:
        hits = []
        for r in runs:
            errors = np.array(list(r.per_candidate_true_error.values()))
            hits.append(r.per_candidate_true_error[r.selected[0]] >= _worst_k_threshold(errors))
        prob_worst5 = float(np.mean(hits))
        random_worst_agg = float(np.mean(random_worsts))

    ttests = []
    random_per_run = np.array(random_avgs)
    for comparison, series_b in (
        ("cmek_vs_random_abs_error", random_per_run),
        ("cmek_vs_optimal_abs_error", per_run_best),
    ):
        try:
            t, p, normality = paired_ttest(per_run_errors, series_b)
            ttests.append(TTestResult(comparison, t, p, normality))
        except ValueError:
            pass

    curve = tuple(
        (n_sel, float(np.mean(row["cmek"])), float(np.mean(row["random"])), float(np.mean(row["all"])))
        for n_sel, row in sorted(topn_rows.items())
    )
    return SelectionReport(
        runs=tuple(runs),
        prob_best=prob_best,
        prob_worst5=prob_worst5,
        avg_abs_error=float(np.mean(per_run_errors)),
        random_baseline=RandomAggregate(float(np.mean(random_avgs)), float(np.mean(random_bests)), random_worst_agg),
        topn_curve=curve,
        ttests=tuple(ttests),
        degenerate_flags=tuple(cache.distance_flags()),
    )


def _fmt(value) -> str:
    if value is None:
        return "NA"
    return repr(float(value))


def _report_dict(report: SelectionReport) -> dict:
    return {
        "runs": [
            {
                "target_name": r.target_name,
                "per_candidate_true_error": r.per_candidate_true_error,
                "per_candidate_predicted": r.per_candidate_predicted,
                "selected": list(r.selected),
                "relative_error": r.relative_error,
                "all_domains_error": r.all_domains_error,
            }
            for r in report.runs
        ],
        "prob_best": report.prob_best,
        "prob_worst5": report.prob_worst5,
        "avg_abs_error": report.avg_abs_error,
        "random_baseline": {
            "avg_abs_error": report.random_baseline.avg_abs_error,
            "prob_best": report.random_baseline.prob_best,
            "prob_worst5": report.random_baseline.prob_worst5,
        },
        "topn_curve": [
            {"n": n, "cmek_error": c, "random_error": r, "all_domains_error": a}
            for n, c, r, a in report.topn_curve
        ],
        "ttests": [
            {"comparison": t.comparison, "t": t.t, "p": t.p, "normality": t.normality}
            for t in report.ttests
        ],
        "degenerate_flags": list(report.degenerate_flags),
    }


def emit_report(report: SelectionReport, out_dir) -> list[Path]:
    """Write report.json, table1.csv, fig3.csv, and fig4.csv.

    Output bytes are a pure function of the report, so identical inputs and
    seeds reproduce identical files.
    """
    if not report.runs:
        raise ValueError("no runs: cannot emit an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_report_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(report_path)

    optimal_avg = float(np.mean([min(r.per_candidate_true_error.values()) for r in report.runs]))
    optimal_worst5 = None if report.prob_worst5 is None else 0.0
    table_path = out_dir / "table1.csv"
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("method,prob_best,prob_worst5,avg_abs_error\n")
        fh.write(f"optimal,{_fmt(1.0)},{_fmt(optimal_worst5)},{_fmt(optimal_avg)}\n")
        fh.write(f"cmek,{_fmt(report.prob_best)},{_fmt(report.prob_worst5)},{_fmt(report.avg_abs_error)}\n")
        rb = report.random_baseline
        fh.write(f"random,{_fmt(rb.prob_best)},{_fmt(rb.prob_worst5)},{_fmt(rb.avg_abs_error)}\n")
    paths.append(table_path)

    fig3_path = out_dir / "fig3.csv"
    cmek_raw = [(r.target_name, r.relative_error, 1.0) for r in report.runs]
    random_raw = []
    for r in report.runs:
        best = min(r.per_candidate_true_error.values())
        weight = 1.0 / len(r.per_candidate_true_error)
        for name in sorted(r.per_candidate_true_error):
            random_raw.append((r.target_name, r.per_candidate_true_error[name] - best, weight))
    bin_width = 0.025
    max_rel = max([v for _, v, _ in cmek_raw + random_raw], default=0.0)
    n_bins = max(1, int(math.floor(max_rel / bin_width)) + 1)
    cmek_bins = np.zeros(n_bins)
    random_bins = np.zeros(n_bins)
    for _, v, w in cmek_raw:
        cmek_bins[min(int(v / bin_width), n_bins - 1)] += w / len(report.runs)
    for _, v, w in random_raw:
        random_bins[min(int(v / bin_width), n_bins - 1)] += w / len(report.runs)
    with open(fig3_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,series,x0,x1,y\n")
        for target, v, w in cmek_raw:
            fh.write(f"raw,cmek,{target},{_fmt(v)},{_fmt(w)}\n")
        for target, v, w in random_raw:
            fh.write(f"raw,random,{target},{_fmt(v)},{_fmt(w)}\n")
        for i in range(n_bins):
            lo, hi = i * bin_width, (i + 1) * bin_width
            fh.write(f"bin,cmek,{_fmt(lo)},{_fmt(hi)},{_fmt(cmek_bins[i])}\n")
        for i in range(n_bins):
            lo, hi = i * bin_width, (i + 1) * bin_width
            fh.write(f"bin,random,{_fmt(lo)},{_fmt(hi)},{_fmt(random_bins[i])}\n")
    paths.append(fig3_path)

    fig4_path = out_dir / "fig4.csv"
    with open(fig4_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,cmek_error,random_error,all_domains_error\n")
        for n_sel, cmek_err, random_err, all_err in report.topn_curve:
            fh.write(f"{n_sel},{_fmt(cmek_err)},{_fmt(random_err)},{_fmt(all_err)}\n")
    paths.append(fig4_path)
    return paths
