"""Command-line surface: distances, select, benchmark, synth."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .bench import emit_report, outer_loo_benchmark
from .classifier import TrainConfig
from .cmek import (
    FEATURE_ORDER,
    DomainCache,
    build_loo_training_set,
    fit_weights,
    predict,
)
from .corpus import load_manifest
from .distances import DistanceConfig, export_distance_matrix_csv, load_ground_matrix
from .synthgen import generate_family, load_family_spec, write_family


@dataclass(frozen=True)
class GlobalConfig:
    """Full pipeline configuration; serializable to/from one JSON file.

    The shipped configs/paper_settings.json holds the canonical defaults:
    top 1000 features, 10-fold CV, lambda 0.05 / 1e-5 smoothing, a 5000
    document MMD cap, and the binary EMD ground metric.
    """

    seed: int = 0
    top_k_features: int = 1000
    fold_count: int = 10
    distance: DistanceConfig = field(default_factory=DistanceConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.top_k_features < 1:
            raise ValueError("top_k_features must be >= 1")
        if self.fold_count < 2:
            raise ValueError("fold_count must be >= 2")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "GlobalConfig":
        dist = dict(obj.get("distance", {}))
        matrix_csv = dist.pop("ground_matrix_csv", None)
        if matrix_csv is not None:
            path = Path(matrix_csv)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            dist["ground_metric"] = "custom"
            dist["ground_matrix"] = load_ground_matrix(path)
        return cls(
            seed=obj.get("seed", 0),
            top_k_features=obj.get("top_k_features", 1000),
            fold_count=obj.get("fold_count", 10),
            distance=DistanceConfig(**dist),
            train=TrainConfig(**obj.get("train", {})),
        )

    @classmethod
    def from_file(cls, path) -> "GlobalConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def to_dict(self) -> dict:
        dist = dataclasses.asdict(self.distance)
        dist.pop("ground_matrix")
        return {
            "seed": self.seed,
            "top_k_features": self.top_k_features,
            "fold_count": self.fold_count,
            "distance": dist,
            "train": dataclasses.asdict(self.train),
        }


def _load_config(args) -> GlobalConfig:
    cfg = GlobalConfig.from_file(args.config) if args.config else GlobalConfig()
    if args.seed_override is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed_override)
    return cfg


def _split_roles(entries):
    candidates = [c for role, c in entries if role == "candidate"]
    targets = [c for role, c in entries if role == "target"]
    return candidates, targets


def cmd_distances(args) -> int:
    cfg = _load_config(args)
    corpora = [c for _, c in load_manifest(args.manifest)]
    if len(corpora) < 2:
        raise ValueError("need >= 2 corpora for a distance matrix")
    for c in corpora:
        if not c.fully_labeled:
            raise ValueError(f"distances requires labels (inner_error column): corpus {c.name!r}")
    cache = DomainCache(cfg.distance, cfg.train, cfg.top_k_features, cfg.seed, cfg.fold_count)
    pairs = sorted(
        ((s, t) for s in corpora for t in corpora if s.name != t.name),
        key=lambda st: (st[0].name, st[1].name),
    )
    cache.warm(pairs, threads=args.threads)
    rows = [(s.name, t.name, cache.distance_vector(s, t), cache.inner_error(s)) for s, t in pairs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_distance_matrix_csv(rows, out / "distances.csv")
    print(out / "distances.csv")
    return 0


def cmd_select(args) -> int:
    cfg = _load_config(args)
    candidates, targets = _split_roles(load_manifest(args.manifest))
    if len(targets) != 1:
        raise ValueError(f"select needs exactly one target corpus, got {len(targets)}")
    if len(candidates) < 3:
        raise ValueError("select needs >= 3 candidate corpora")
    target = targets[0]
    n = args.n if args.n is not None else len(candidates)
    if not 1 <= n <= len(candidates):
        raise ValueError(f"--n must be in [1, {len(candidates)}]")
    cache = DomainCache(cfg.distance, cfg.train, cfg.top_k_features, cfg.seed, cfg.fold_count)
    pairs = build_loo_training_set(
        candidates, cfg.distance, cfg.train, cfg.top_k_features, cfg.seed, cfg.fold_count,
        cache=cache, threads=args.threads,
    )
    weights = fit_weights(pairs)
    cache.warm([(c, target) for c in candidates], threads=args.threads)
    scored = sorted(
        (predict(weights, cache.feature_vector(c, target)), c.name) for c in candidates
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "selection.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank,candidate,predicted_error\n")
        for rank, (pred, name) in enumerate(scored[:n], start=1):
            fh.write(f"{rank},{name},{float(pred)!r}\n")
    with open(out / "weights.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "beta": [float(v) for v in weights.beta],
                "objective": weights.objective,
                "n_pairs": weights.n_pairs,
                "feature_order": list(FEATURE_ORDER),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(out / "selection.csv")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    corpora = [c for _, c in load_manifest(args.manifest)]
    if len(corpora) < 4:
        raise ValueError("benchmark requires >= 4 corpora")
    for c in corpora:
        if not c.fully_labeled:
            raise ValueError(f"benchmark requires labels on every corpus: {c.name!r}")
    report = outer_loo_benchmark(
        corpora,
        cfg.distance,
        cfg.train,
        cfg.top_k_features,
        cfg.seed,
        fold_count=cfg.fold_count,
        topn_max=args.n,
        threads=args.threads,
    )
    for path in emit_report(report, args.out):
        print(path)
    return 0


def cmd_synth(args) -> int:
    reference_seed, shifts, template = load_family_spec(args.spec)
    if args.seed_override is not None:
        reference_seed = args.seed_override
    corpora = generate_family(reference_seed, shifts, template)
    for path in write_family(corpora, reference_seed, shifts, template, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmekselect",
        description="Source-domain selection for cross-domain text classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="corpus manifest JSON")
        p.add_argument("--config", help="GlobalConfig JSON (defaults used when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed-override", type=int, default=None)

    p = sub.add_parser("distances", help="pairwise distance matrix CSV")
    common(p)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("select", help="rank candidates for one target")
    common(p)
    p.add_argument("--n", type=int, default=None, help="how many candidates to emit")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("benchmark", help="outer leave-one-out benchmark")
    common(p)
    p.add_argument("--n", type=int, default=None, help="top-n curve depth (off when omitted)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="generate a synthetic corpus family")
    common(p, manifest=False)
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
