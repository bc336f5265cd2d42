"""
Clustering evaluation over labeled pixels (truth id ≠ 0).

OA, AA, Kappa and Purity are read after the optimal one-to-one mapping of predicted
clusters onto classes; NMI, ARI and the pair-counting Precision / Recall / F1 do not
depend on any mapping. Everything is reported in percent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, cohen_kappa_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix, pair_confusion_matrix

from spgcc.errors import ParameterError, ShapeError
from spgcc.models import LabelRaster, MetricReport

logger = logging.getLogger("spgcc.metrics")


@dataclass
class ContingencyTable:
    """counts[i, j] = labeled pixels predicted as pred_ids[i] whose class is true_ids[j]."""
    counts: np.ndarray
    pred_ids: np.ndarray
    true_ids: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(pred: np.ndarray, truth: np.ndarray) -> ContingencyTable:
    pred_ids, pred_index = np.unique(pred, return_inverse=True)
    true_ids, true_index = np.unique(truth, return_inverse=True)
    counts = contingency_matrix(pred_index, true_index)
    return ContingencyTable(counts=np.asarray(counts, dtype=np.int64), pred_ids=pred_ids, true_ids=true_ids)


def hungarian_match(counts: np.ndarray) -> np.ndarray:
    """
    perm[i] = column matched to row i, maximizing the matched mass.
    The table is padded square with zeros, so perm[i] ≥ number of columns means row i
    stays unmatched.
    """
    counts = np.asarray(counts)
    if counts.ndim != 2 or counts.size == 0:
        raise ParameterError(f"hungarian_match needs a non-empty 2-D table, got shape {counts.shape}")
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=counts.dtype)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    perm = np.empty(size, dtype=np.int64)
    perm[rows] = cols
    return perm[: counts.shape[0]]


def matched_mass(counts: np.ndarray, perm: np.ndarray) -> int:
    rows = np.flatnonzero(perm < counts.shape[1])
    return int(counts[rows, perm[rows]].sum())


def _pair_scores(truth: np.ndarray, pred: np.ndarray) -> Dict[str, float]:
    (_, fp), (fn, tp) = pair_confusion_matrix(truth, pred)
    truth_pairs, pred_pairs = tp + fn, tp + fp
    if pred_pairs:
        precision = tp / pred_pairs
    else:
        precision = 1.0 if truth_pairs == 0 else 0.0
    if truth_pairs:
        recall = tp / truth_pairs
    else:
        recall = 1.0 if pred_pairs == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"Precision": 100.0 * precision, "Recall": 100.0 * recall, "F1": 100.0 * f1}


def compute_metrics(pred: LabelRaster, truth: LabelRaster) -> MetricReport:
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction raster {pred.shape} does not match truth raster {truth.shape}")
    labeled = truth.flat() > 0
    if not labeled.any():
        raise ParameterError("no labeled pixels: every truth id is 0")
    t = truth.flat()[labeled]
    p = pred.flat()[labeled]
    n = len(t)

    table = contingency(p, t)
    perm = hungarian_match(table.counts)
    matched_rows = perm < table.counts.shape[1]

    # predicted cluster -> matched class id, -1 for clusters left unmatched
    lookup = np.full(len(table.pred_ids), -1, dtype=np.int64)
    lookup[matched_rows] = table.true_ids[perm[matched_rows]]
    mapped = lookup[np.searchsorted(table.pred_ids, p)]

    correct = mapped == t
    per_class = [correct[t == c].mean() for c in table.true_ids]
    if np.unique(np.concatenate([t, mapped])).size == 1:
        kappa = 1.0
    else:
        kappa = cohen_kappa_score(t, mapped)

    report = MetricReport(
        OA=100.0 * correct.sum() / n,
        AA=100.0 * float(np.mean(per_class)),
        Kappa=100.0 * kappa,
        NMI=100.0 * normalized_mutual_info_score(t, p, average_method="arithmetic"),
        ARI=100.0 * adjusted_rand_score(t, p),
        Purity=100.0 * table.counts.max(axis=1).sum() / n,
        **_pair_scores(t, p),
    )
    logger.info(f"Evaluated {n} labeled pixels: OA={report.OA:.2f} Kappa={report.Kappa:.2f} NMI={report.NMI:.2f}")
    return report


# ---------------------------------------------------------------------------
# Report file
# ---------------------------------------------------------------------------

def write_report(path: Path, report: MetricReport) -> None:
    """One "name<TAB>value" line per metric, two decimals."""
    df = pd.DataFrame({
        "name": report.get_headers(),
        "value": [f"{v:.2f}" for v in report.to_dict().values()],
    })
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, sep="\t", header=False, index=False)


def read_report(path: Path) -> Dict[str, float]:
    df = pd.read_csv(path, sep="\t", header=None, names=["name", "value"])
    return dict(zip(df["name"], df["value"].astype(float)))
