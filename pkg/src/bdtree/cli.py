"""Command-line surface: dataset generation and ingestion, chain runs,
cross-validated envelope evaluation, and the move-balance emulator.

Every run directory gets a manifest echoing the resolved configuration and
a dataset fingerprint; re-running from the manifest reproduces chain and
report files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .balance import BalanceResult, BalanceSpec, analytic_fractions, emulate
from .dataset import (
    Dataset,
    SchemaError,
    dataset_schema,
    gen_xor3,
    kfold_split,
    load_csv,
    read_schema,
    save_csv,
    write_schema,
)
from .envelope import aggregate_report, ensemble_votes, fold_outcome, per_datum_rows
from .likelihood import ChipmanPrior, PriorConfig
from .rjmcmc import ChainConfig, ChainDiagnostics, Ensemble, ProposalConfig, run_chain, subseed
from .tree import to_record


def _chain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["standard", "sweeping"], default="sweeping")
    p.add_argument("--p-min", type=int, default=5, help="minimum data points per partition")
    p.add_argument("--burn-in", type=int, default=10000)
    p.add_argument("--post", type=int, default=10000)
    p.add_argument("--thin", type=int, default=7, help="keep every thin-th post-burn-in tree")
    p.add_argument("--alpha", type=str, default="", help="comma-separated Dirichlet prior, default all ones")
    p.add_argument("--p-birth", type=float, default=0.1)
    p.add_argument("--p-death", type=float, default=0.1)
    p.add_argument("--p-change-split", type=float, default=0.2)
    p.add_argument("--p-change-rule", type=float, default=0.6)
    p.add_argument("--sigma", type=float, default=1.0, help="change-rule walk scale")
    p.add_argument("--chipman-gamma", type=float, default=None)
    p.add_argument("--chipman-delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file, label in the last column")
    p.add_argument("--schema", required=True, help="sidecar schema file")
    p.add_argument("--sentinel", type=float, default=None, help="value flagged as unimportant")
    p.add_argument("--has-header", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdtree", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bdtree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-xor3", help="generate the noisy sign-product benchmark")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output CSV path; schema written alongside")

    s = sub.add_parser("sample", help="run one chain and write its artifacts")
    s.add_argument("--from-manifest", default=None, help="re-run the configuration of a previous manifest")
    s.add_argument("--data")
    s.add_argument("--schema")
    s.add_argument("--sentinel", type=float, default=None)
    s.add_argument("--has-header", action="store_true")
    _chain_flags(s)
    s.add_argument("--out-dir", required=True)

    c = sub.add_parser("crossval", help="k-fold chains with envelope evaluation")
    c.add_argument("--from-manifest", default=None)
    c.add_argument("--data")
    c.add_argument("--schema")
    c.add_argument("--sentinel", type=float, default=None)
    c.add_argument("--has-header", action="store_true")
    _chain_flags(c)
    c.add_argument("--folds", type=int, default=5)
    c.add_argument("--gamma0", type=float, default=0.99)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out-dir", required=True)

    e = sub.add_parser("emulate", help="move-balance emulation under unavailability")
    e.add_argument("--p-b", type=float, default=0.2)
    e.add_argument("--p-d", type=float, default=0.2)
    e.add_argument("--p-c", type=float, default=0.6)
    e.add_argument("--p-bu", type=float, required=True)
    e.add_argument("--p-cu", type=float, required=True)
    e.add_argument("--mode", choices=["standard", "sweeping"], default="standard")
    e.add_argument("--case3-frac", type=float, default=0.0)
    e.add_argument("--draws", type=int, default=10000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="output CSV of proposed vs realized fractions")
    return parser


def _configs_from_flags(flags: dict) -> ChainConfig:
    alpha = None
    if flags.get("alpha"):
        alpha = tuple(float(tok) for tok in str(flags["alpha"]).split(","))
    tree_prior = None
    if flags.get("chipman_gamma") is not None or flags.get("chipman_delta") is not None:
        if flags.get("chipman_gamma") is None or flags.get("chipman_delta") is None:
            raise ValueError("chipman prior needs both --chipman-gamma and --chipman-delta")
        tree_prior = ChipmanPrior(gamma=flags["chipman_gamma"], delta=flags["chipman_delta"])
    prior = PriorConfig(alpha=alpha, p_min=flags["p_min"], tree_prior=tree_prior)
    proposal = ProposalConfig(
        p_birth=flags["p_birth"],
        p_death=flags["p_death"],
        p_change_split=flags["p_change_split"],
        p_change_rule=flags["p_change_rule"],
        sigma=flags["sigma"],
    )
    return ChainConfig(
        burn_in=flags["burn_in"],
        post_burn_in=flags["post"],
        thin=flags["thin"],
        seed=flags["seed"],
        strategy=flags["strategy"],
        prior=prior,
        proposal=proposal,
    )


def _flags_dict(args: argparse.Namespace, keys: list[str]) -> dict:
    return {k: getattr(args, k) for k in keys}

_SAMPLE_KEYS = [
    "data", "schema", "sentinel", "has_header", "strategy", "p_min", "burn_in", "post",
    "thin", "alpha", "p_birth", "p_death", "p_change_split", "p_change_rule", "sigma",
    "chipman_gamma", "chipman_delta", "seed",
]
_CROSSVAL_KEYS = _SAMPLE_KEYS + ["folds", "gamma0", "workers"]


def _load_dataset(flags: dict) -> Dataset:
    if not flags.get("data") or not flags.get("schema"):
        raise ValueError("--data and --schema are required (or use --from-manifest)")
    schema = read_schema(flags["schema"])
    return load_csv(flags["data"], schema, sentinel=flags.get("sentinel"), has_header=flags.get("has_header", False))


def _manifest(command: str, flags: dict, d: Dataset, wall: float) -> dict:
    return {
        "tool": "bdtree",
        "version": __version__,
        "command": command,
        "flags": flags,
        "seed": flags.get("seed"),
        "dataset": {"rows": d.n_rows, "columns": d.n_features, "sha256": d.fingerprint()},
        "timings": {"wall_seconds": wall},
    }


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_chain_artifacts(out: Path, ensemble: Ensemble, diag: ChainDiagnostics, cfg: ChainConfig) -> None:
    with open(out / "chain.jsonl", "w") as fh:
        for tree, it in zip(ensemble.trees, ensemble.iterations):
            fh.write(json.dumps(to_record(tree, it)) + "\n")
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "log_lik", "split_count", "accepted", "unavailable"])
        for i in range(len(diag.log_lik)):
            writer.writerow(
                [i + 1, repr(float(diag.log_lik[i])), int(diag.split_count[i]), int(diag.accepted[i]), int(diag.unavailable[i])]
            )
    _write_json(out / "diag.json", diag_dict(diag, cfg))


def diag_dict(diag: ChainDiagnostics, cfg: ChainConfig) -> dict:
    return {
        "acceptance_rate": diag.acceptance_rate,
        "resample_rate": diag.resample_rate,
        "swept_count": diag.swept_count,
        "resampled_count": diag.resampled_count,
        "config": {
            "burn_in": cfg.burn_in,
            "post_burn_in": cfg.post_burn_in,
            "thin": cfg.thin,
            "seed": cfg.seed if isinstance(cfg.seed, int) else None,
            "strategy": cfg.strategy,
            "p_min": cfg.prior.p_min,
            "alpha": list(cfg.prior.alpha) if cfg.prior.alpha else None,
            "moves": [
                cfg.proposal.p_birth,
                cfg.proposal.p_death,
                cfg.proposal.p_change_split,
                cfg.proposal.p_change_rule,
            ],
            "sigma": cfg.proposal.sigma,
        },
    }


def cmd_gen_xor3(args) -> int:
    d = gen_xor3(args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(d, out)
    write_schema(out.with_suffix(".schema"), d)
    print(f"wrote {out} ({d.n_rows} rows) and {out.with_suffix('.schema')}")
    return 0


def cmd_sample(args) -> int:
    if args.from_manifest:
        flags = json.loads(Path(args.from_manifest).read_text())["flags"]
    else:
        flags = _flags_dict(args, _SAMPLE_KEYS)
    d = _load_dataset(flags)
    cfg = _configs_from_flags(flags)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ensemble, diag = run_chain(d, cfg)
    wall = time.perf_counter() - t0
    _write_chain_artifacts(out, ensemble, diag, cfg)
    _write_json(out / "manifest.json", _manifest("sample", flags, d, wall))
    print(
        f"sampled {len(ensemble)} trees in {wall:.1f}s "
        f"(acceptance {diag.acceptance_rate:.3f}, resample {diag.resample_rate:.3f})"
    )
    return 0


def _fold_job(payload):
    d, train_idx, test_idx, cfg, gamma0, fold_i = payload
    train = d.take(train_idx)
    test = d.take(test_idx)
    ensemble, diag = run_chain(train, cfg)
    votes = ensemble_votes(ensemble, test)
    outcome = fold_outcome(
        votes,
        gamma0,
        fold=fold_i,
        split_nodes=ensemble.mean_split_count(),
        total_nodes=ensemble.mean_node_count(),
    )
    return outcome, per_datum_rows(votes, gamma0), diag


def run_crossval(d: Dataset, cfg: ChainConfig, folds: int, gamma0: float, seed: int, workers: int = 1):
    """Independent chains on k training folds, each scored on its test fold.

    Fold seeds are named substreams of `seed`, so results do not depend on
    worker scheduling.
    """
    if folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if not 1.0 / d.class_count < gamma0 <= 1.0:
        raise ValueError(f"gamma0 must lie in (1/{d.class_count}, 1]")
    plan = kfold_split(d, folds, seed=subseed(seed, 0))
    jobs = []
    for i, (train_idx, test_idx) in enumerate(plan.folds):
        fold_cfg = ChainConfig(
            burn_in=cfg.burn_in,
            post_burn_in=cfg.post_burn_in,
            thin=cfg.thin,
            seed=subseed(seed, 1, i),
            strategy=cfg.strategy,
            prior=cfg.prior,
            proposal=cfg.proposal,
        )
        jobs.append((d, train_idx, test_idx, fold_cfg, gamma0, i + 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fold_job, jobs))
    else:
        results = [_fold_job(job) for job in jobs]
    outcomes = [r[0] for r in results]
    rows_per_fold = [r[1] for r in results]
    diags = [r[2] for r in results]
    report = aggregate_report(outcomes, gamma0)
    return report, rows_per_fold, diags


def cmd_crossval(args) -> int:
    if args.from_manifest:
        flags = json.loads(Path(args.from_manifest).read_text())["flags"]
    else:
        flags = _flags_dict(args, _CROSSVAL_KEYS)
    d = _load_dataset(flags)
    cfg = _configs_from_flags(flags)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report, rows_per_fold, diags = run_crossval(
        d, cfg, flags["folds"], flags["gamma0"], flags["seed"], workers=flags.get("workers", 1)
    )
    wall = time.perf_counter() - t0
    doc = report.to_json_dict()
    doc["diagnostics"] = [
        {
            "fold": i + 1,
            "acceptance_rate": dg.acceptance_rate,
            "resample_rate": dg.resample_rate,
            "swept_count": dg.swept_count,
        }
        for i, dg in enumerate(diags)
    ]
    _write_json(out / "report.json", doc)
    for i, rows in enumerate(rows_per_fold):
        with open(out / f"fold_{i + 1}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    _write_json(out / "manifest.json", _manifest("crossval", flags, d, wall))
    agg = report.aggregate
    print(
        f"crossval done in {wall:.1f}s: accuracy {agg['accuracy'].mean:.1f}%, "
        f"CC {agg['cc'].mean:.1f}%, U {agg['u'].mean:.1f}%, CI {agg['ci'].mean:.1f}%, "
        f"split nodes {agg['nodes'].mean:.1f}"
    )
    return 0


def cmd_emulate(args) -> int:
    spec = BalanceSpec(
        p_b=args.p_b,
        p_d=args.p_d,
        p_c=args.p_c,
        p_bu=args.p_bu,
        p_cu=args.p_cu,
        mode=args.mode,
        case3_frac=args.case3_frac,
        draws=args.draws,
    )
    result = emulate(spec, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["move", "proposed", "realized"])
        writer.writerow(["birth", spec.p_b, result.birth])
        writer.writerow(["death", spec.p_d, result.death])
        writer.writerow(["change", spec.p_c, result.change])
    analytic = analytic_fractions(spec)
    print(
        f"realized birth {result.birth:.4f}, death {result.death:.4f}, change {result.change:.4f} "
        f"(analytic {analytic[0]:.4f}/{analytic[1]:.4f}/{analytic[2]:.4f}, "
        f"resampled {result.resample_fraction:.4f})"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-xor3":
            return cmd_gen_xor3(args)
        if args.command == "sample":
            return cmd_sample(args)
        if args.command == "crossval":
            return cmd_crossval(args)
        if args.command == "emulate":
            return cmd_emulate(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, SchemaError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
