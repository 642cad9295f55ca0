"""Synthetic networks, link-prediction cross-validation and the LRT size study."""

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .itests import TestKind, chi_squared_sf, REJECT, FAIL_TO_REJECT
from .masks import MaskSpec, make_mask
from .model import ModelVariant, MultilayerNetwork, NNTuckModel, reconstruct
from .solver import FitConfig, fit_multistart

log = logging.getLogger(__name__)

# affinity matrices of the two planted layer communities
G_FIRST = np.array([[0.2, 0.1], [0.1, 0.2]])
G_THIRD = np.array([[0.3, 0.01], [0.01, 0.0]])

SYNTHETIC_Y = {
    1: np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [0.1, 0.9]]),
    2: np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]),
}


def two_block_membership(N):
    """Hard membership: the first ``N // 2`` nodes in group 0, the rest in group 1."""
    U = np.zeros((N, 2))
    U[: N // 2, 0] = 1.0
    U[N // 2:, 1] = 1.0
    return U


def sample_poisson_network(U, V, Y, core, seed, directed=True):
    """Draw integer counts ``A ~ Poisson(core x1 U x2 V x3 Y)`` entrywise.

    An undirected draw samples the upper triangle (diagonal included) of
    each layer and mirrors it, so the rates must be symmetric.
    """
    rates = reconstruct(NNTuckModel(U, V, Y, core))
    if (rates < 0).any():
        raise ValueError("Poisson rates must be nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.poisson(rates).astype(float)
    if not directed:
        if not np.allclose(rates, rates.transpose(1, 0, 2)):
            raise ValueError("undirected sampling needs symmetric rates")
        upper = np.triu(np.ones(A.shape[:2], dtype=bool))[:, :, None]
        A = np.where(upper, A, A.transpose(1, 0, 2))
    return MultilayerNetwork(A, directed=directed)


def synthetic_network(which, seed=0, N=200):
    """One of the two planted four-layer networks with K = C = 2.

    Layers 1 and 3 carry the two base affinity matrices; layers 2 and 4 mix
    them through the rows of Y (network 1) or copy them (network 2, strata).
    Returns ``(network, ground_truth_model)``.
    """
    if which not in SYNTHETIC_Y:
        raise ValueError(f"synthetic network must be 1 or 2, got {which!r}")
    U = two_block_membership(N)
    core = np.stack([G_FIRST, G_THIRD], axis=2)
    Y = SYNTHETIC_Y[which].copy()
    truth = NNTuckModel(U, U.copy(), Y, core, ModelVariant.dependent(2, 2))
    network = sample_poisson_network(U, U, Y, core, seed, directed=True)
    network.layer_labels = [f"layer{k + 1}" for k in range(4)]
    return network, truth


def redundant_network(N, L, seed, affinity=G_FIRST):
    """Every layer drawn from the same two-block SBM (half the nodes per block)."""
    U = two_block_membership(N)
    return sample_poisson_network(U, U, np.ones((L, 1)), affinity[:, :, None], seed)


def auc(scores, labels):
    """Area under the ROC curve by rank statistics; ties count one half."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative entry")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class CvReport:
    """Per-fold link-prediction results for a grid of model shapes."""

    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def mean_auc(self):
        out = {}
        for row in self.rows:
            out.setdefault(row["model"], []).append(row["auc"])
        return {k: float(np.mean(v)) for k, v in out.items()}

    def summary(self):
        means = self.mean_auc()
        seen, out = set(), []
        for row in self.rows:
            if row["model"] in seen:
                continue
            seen.add(row["model"])
            folds = [r["auc"] for r in self.rows if r["model"] == row["model"]]
            out.append({"model": row["model"], "kind": row["kind"], "K": row["K"],
                        "C": row["C"], "mean_auc": means[row["model"]], "fold_aucs": folds})
        return out

    def to_dict(self, timings=False):
        rows = [r if timings else {k: v for k, v in r.items() if k != "runtime"}
                for r in self.rows]
        return {"config": self.config, "summary": self.summary(), "folds": rows}


CV_COLUMNS = ["model", "kind", "K", "C", "fold", "auc", "test_log_likelihood",
              "train_log_likelihood", "seed", "held_out"]


def cross_validate(network, grid, spec=MaskSpec(), n_starts=20, selection="train",
                   config=FitConfig(), n_jobs=1):
    """Link-prediction cross-validation over ``grid`` (a list of ModelVariant).

    Each of ``spec.folds`` masks is an independent draw. For every mask and
    grid point the best multistart fit on observed entries scores the
    held-out entries by their Poisson rate; labels are held-out ``a > 0``.
    """
    A = network.adjacency
    N, _, L = A.shape
    symmetric = spec.symmetric or not network.directed
    spec = replace(spec, symmetric=symmetric)
    variants = [v.resolve(N, L) for v in grid]
    report = CvReport(config={
        "task": spec.task.value, "folds": spec.folds, "mask_seed": spec.seed,
        "symmetric_masks": symmetric, "n_starts": n_starts, "selection": selection,
        "fit": asdict(config), "grid": [v.label() for v in variants],
    })
    for fold in range(spec.folds):
        mask = make_mask(spec, A.shape, fold)
        held = mask == 0
        labels = A[held] > 0
        for v in variants:
            start = time.perf_counter()
            best = fit_multistart(network, v, config, n_starts, mask=mask,
                                  selection=selection, n_jobs=n_jobs)
            scores = reconstruct(best.model)[held]
            report.rows.append({
                "model": v.label(), "kind": v.kind.value, "K": v.K, "C": v.C,
                "fold": fold, "auc": auc(scores, labels),
                "test_log_likelihood": best.test_log_likelihood,
                "train_log_likelihood": best.log_likelihood,
                "seed": best.seed, "held_out": int(held.sum()),
                "runtime": time.perf_counter() - start,
            })
            log.info("fold %d %s AUC %.4f", fold, v.label(), report.rows[-1]["auc"])
    return report


POWER_COLUMNS = ["N", "L", "K", "replicate", "network_seed", "ll_redundant",
                 "ll_dependent", "statistic", "df", "p_value", "alpha", "verdict"]

DESK_N = (50, 100, 200)
DESK_L = (2, 5, 10)
FULL_N = (50, 100, 200, 500, 1000)
FULL_L = (2, 5, 10, 15, 20)


def lrt_power_study(N_grid=DESK_N, L_grid=DESK_L, K=2, replicates=1, alpha=0.05,
                    seed=0, n_starts=20, config=FitConfig(), n_jobs=1):
    """Redundance LRT on layer-redundant networks across a grid of sizes.

    Every layer is the same two-block SBM, so H0 is true and every rejection
    is a false positive. Returns one row per (N, L, replicate).
    """
    if K != 2:
        raise ValueError("the redundant generator plants two node groups")
    kind = TestKind.redundance(K)
    rows = []
    for N in N_grid:
        for L in L_grid:
            for rep in range(replicates):
                net_seed = int(np.random.SeedSequence([seed, N, L, rep]).generate_state(1)[0])
                net = redundant_network(N, L, net_seed)
                fit_cfg = replace(config, seed=net_seed % (2**31))
                nested = fit_multistart(net, kind.nested_variant(), fit_cfg, n_starts, n_jobs=n_jobs)
                full = fit_multistart(net, kind.full_variant(), fit_cfg, n_starts, n_jobs=n_jobs)
                statistic = max(2.0 * (full.log_likelihood - nested.log_likelihood), 0.0)
                df = kind.raw_df(L)
                p = chi_squared_sf(statistic, df)
                rows.append({
                    "N": N, "L": L, "K": K, "replicate": rep, "network_seed": net_seed,
                    "ll_redundant": nested.log_likelihood, "ll_dependent": full.log_likelihood,
                    "statistic": statistic, "df": df, "p_value": p, "alpha": alpha,
                    "verdict": REJECT if p < alpha else FAIL_TO_REJECT,
                })
                log.info("N=%d L=%d rep=%d p=%.4g", N, L, rep, p)
    return rows


def rejection_rate(rows):
    if not rows:
        return float("nan")
    return sum(r["verdict"] == REJECT for r in rows) / len(rows)


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def to_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False)
