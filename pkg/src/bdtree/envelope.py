"""Uncertainty envelope: per-datum ensemble consistency and the
confident-correct / confident-incorrect / uncertain outcome split.

Each ensemble member casts a hard vote (the argmax of its leaf posterior);
consistency gamma is the plurality fraction, so it lies in [1/C, 1]. The
soft average of leaf posteriors is carried along for reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .rjmcmc import Ensemble
from .tree import check_compatible, route_all

CONFIDENT_CORRECT = "CC"
CONFIDENT_INCORRECT = "CI"
UNCERTAIN = "U"


@dataclass
class VoteMatrix:
    """Hard class votes, one row per ensemble member, one column per datum."""

    votes: np.ndarray  # (N, n) int16 in 1..class_count
    class_count: int
    targets: np.ndarray | None = None
    soft: np.ndarray | None = None  # (n, C) mean leaf posterior

    @property
    def n_members(self) -> int:
        return self.votes.shape[0]

    @property
    def n_data(self) -> int:
        return self.votes.shape[1]


@dataclass(frozen=True)
class Stat:
    mean: float
    two_sigma: float


@dataclass
class FoldOutcome:
    """Envelope rates (percent) and model sizes for one evaluation fold."""

    fold: int
    accuracy: float
    cc: float
    ci: float
    u: float
    split_nodes: float
    total_nodes: float
    n_test: int


@dataclass
class EnvelopeReport:
    gamma0: float
    per_fold: list[FoldOutcome]
    aggregate: dict[str, Stat] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        table_keys = {
            "nodes": "Number of DT nodes",
            "accuracy": "Perform, %",
            "cc": "Sure correct, %",
            "u": "Uncertain, %",
            "ci": "Sure incorrect, %",
        }
        return {
            "gamma0": self.gamma0,
            "folds": len(self.per_fold),
            "per_fold": [
                {
                    "fold": f.fold,
                    "accuracy": f.accuracy,
                    "cc": f.cc,
                    "ci": f.ci,
                    "u": f.u,
                    "split_nodes": f.split_nodes,
                    "total_nodes": f.total_nodes,
                    "n_test": f.n_test,
                }
                for f in self.per_fold
            ],
            "aggregate": {
                key: {"mean": s.mean, "two_sigma": s.two_sigma} for key, s in self.aggregate.items()
            },
            "table": {
                label: f"{self.aggregate[key].mean:.1f}+-{self.aggregate[key].two_sigma:.1f}"
                for key, label in table_keys.items()
                if key in self.aggregate
            },
        }


def ensemble_votes(e: Ensemble, d: Dataset, alpha: np.ndarray | None = None) -> VoteMatrix:
    """Route every datum through every sampled tree and record hard votes."""
    if not e.trees:
        raise ValueError("empty ensemble")
    if alpha is None:
        alpha = e.config.prior.resolve_alpha(d.class_count)
    alpha = np.asarray(alpha, dtype=np.float64)
    a_sum = alpha.sum()
    n = d.n_rows
    votes = np.empty((len(e.trees), n), dtype=np.int16)
    soft = np.zeros((n, d.class_count))
    for t_i, tree in enumerate(e.trees):
        check_compatible(tree, d.kinds)
        for leaf, idx in route_all(tree, d.x):
            post = (leaf.counts + alpha) / (leaf.counts.sum() + a_sum)
            votes[t_i, idx] = int(np.argmax(post)) + 1
            soft[idx] += post
    soft /= len(e.trees)
    return VoteMatrix(votes=votes, class_count=d.class_count, targets=d.y.copy(), soft=soft)


def vote_shares(v: VoteMatrix) -> np.ndarray:
    """(C, n) matrix of per-class vote counts."""
    counts = np.empty((v.class_count, v.n_data), dtype=np.int64)
    for c in range(1, v.class_count + 1):
        counts[c - 1] = (v.votes == c).sum(axis=0)
    return counts


def consistency(v: VoteMatrix, datum: int) -> tuple[int, float]:
    """Plurality class and agreement fraction for one datum; ties go to the
    lowest class id."""
    col = v.votes[:, datum]
    counts = np.bincount(col, minlength=v.class_count + 1)[1:]
    pred = int(np.argmax(counts)) + 1
    return pred, float(counts[pred - 1] / v.n_members)


def consistency_all(v: VoteMatrix) -> tuple[np.ndarray, np.ndarray]:
    counts = vote_shares(v)
    preds = np.argmax(counts, axis=0) + 1
    gammas = counts.max(axis=0) / v.n_members
    return preds.astype(np.int64), gammas


def classify_outcome(predicted: int, gamma: float, target: int | None, gamma0: float) -> str:
    """CC / CI / U label for one datum at confidence threshold gamma0."""
    if target is None:
        raise ValueError("outcome classification needs a target label")
    if gamma < gamma0:
        return UNCERTAIN
    return CONFIDENT_CORRECT if predicted == target else CONFIDENT_INCORRECT


def fold_outcome(v: VoteMatrix, gamma0: float, fold: int = 0, split_nodes: float = 0.0, total_nodes: float = 0.0) -> FoldOutcome:
    """Envelope rates for one evaluated fold, in percent."""
    if v.targets is None:
        raise ValueError("targets required to score a fold")
    preds, gammas = consistency_all(v)
    correct = preds == v.targets
    confident = gammas >= gamma0
    n = v.n_data
    return FoldOutcome(
        fold=fold,
        accuracy=100.0 * correct.mean(),
        cc=100.0 * (confident & correct).mean(),
        ci=100.0 * (confident & ~correct).mean(),
        u=100.0 * (~confident).mean(),
        split_nodes=split_nodes,
        total_nodes=total_nodes,
        n_test=n,
    )


def _stat(values: list[float]) -> Stat:
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return Stat(mean=float(arr.mean()), two_sigma=2.0 * sd)


def aggregate_report(folds: list[FoldOutcome], gamma0: float) -> EnvelopeReport:
    """Mean and 2 * sample-sd across folds for every reported rate."""
    if not folds:
        raise ValueError("need at least one fold")
    report = EnvelopeReport(gamma0=gamma0, per_fold=list(folds))
    report.aggregate = {
        "accuracy": _stat([f.accuracy for f in folds]),
        "cc": _stat([f.cc for f in folds]),
        "ci": _stat([f.ci for f in folds]),
        "u": _stat([f.u for f in folds]),
        "nodes": _stat([f.split_nodes for f in folds]),
        "total_nodes": _stat([f.total_nodes for f in folds]),
    }
    return report


def per_datum_rows(v: VoteMatrix, gamma0: float) -> list[dict]:
    """Row dicts for the per-datum CSV: outcome columns plus the soft
    posterior for reference."""
    preds, gammas = consistency_all(v)
    rows = []
    for i in range(v.n_data):
        target = int(v.targets[i]) if v.targets is not None else None
        row = {
            "index": i,
            "target": target,
            "predicted": int(preds[i]),
            "gamma": float(gammas[i]),
            "outcome": classify_outcome(int(preds[i]), float(gammas[i]), target, gamma0)
            if target is not None
            else "",
        }
        if v.soft is not None:
            for c in range(v.class_count):
                row[f"p_{c + 1}"] = float(v.soft[i, c])
        rows.append(row)
    return rows
