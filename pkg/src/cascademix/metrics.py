"""Recovery metrics: relative rate error, support accuracy, pi error, overlap.

Mixture estimates are only identified up to swapping the two layers, so
:func:`evaluate` aligns the estimate with the truth before scoring.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import EmptySupport, ValidationError
from .generate import overlap
from .mixture import MixtureParams

DEFAULT_THRESHOLD = 0.05
ACC_DEFINITION = "1 - symdiff_ratio"

__all__ = [
    "DEFAULT_THRESHOLD", "EvalReport", "align", "evaluate", "mae_pi", "mae_rates",
    "overlap", "symdiff_ratio", "topology_metrics",
]


def _pair(est, truth) -> tuple[np.ndarray, np.ndarray]:
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValidationError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return est, truth


def mae_rates(est: np.ndarray, truth: np.ndarray) -> float:
    """Mean of ``|est - truth| / truth`` over the cells where ``truth > 0``."""
    est, truth = _pair(est, truth)
    on = truth > 0
    if not on.any():
        raise EmptySupport("true network has no edges")
    return float(np.mean(np.abs(est[on] - truth[on]) / truth[on]))


def mae_pi(est_pi: np.ndarray, true_pi: np.ndarray) -> float:
    """Mean of ``|est - truth| / truth`` over nodes; every true value must be positive."""
    est, truth = _pair(est_pi, true_pi)
    if truth.size == 0:
        raise EmptySupport("empty probability vector")
    if np.any(truth <= 0):
        raise ValidationError("true probabilities must be strictly positive")
    return float(np.mean(np.abs(est - truth) / truth))


def _support(net: np.ndarray, threshold: float) -> np.ndarray:
    return np.asarray(net) > threshold


def _true_support(net: np.ndarray) -> np.ndarray:
    return np.asarray(net) > 0


def symdiff_ratio(est: np.ndarray, truth: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> float:
    """``|est XOR truth| / (|est| + |truth|)`` of the supports; 0 when both are empty.

    The estimate's support is ``est > threshold``; the truth's is its nonzero cells.
    """
    est, truth = _pair(est, truth)
    a, b = _support(est, threshold), _true_support(truth)
    total = np.count_nonzero(a) + np.count_nonzero(b)
    return float(np.count_nonzero(a ^ b)) / total if total else 0.0


def topology_metrics(est: np.ndarray, truth: np.ndarray,
                     threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float, float]:
    """``(accuracy, precision, recall)`` of the estimated support ``{est > threshold}``
    against the true support ``{truth > 0}``.

    Accuracy is ``1 - symdiff_ratio``. Precision is 0 for an empty estimated
    support and recall is 0 for an empty true support.
    """
    if not threshold >= 0:
        raise ValidationError("threshold must be nonnegative")
    est, truth = _pair(est, truth)
    a, b = _support(est, threshold), _true_support(truth)
    hits = np.count_nonzero(a & b)
    n_est, n_true = np.count_nonzero(a), np.count_nonzero(b)
    precision = hits / n_est if n_est else 0.0
    recall = hits / n_true if n_true else 0.0
    return 1.0 - symdiff_ratio(est, truth, threshold), float(precision), float(recall)


@dataclass(frozen=True)
class EvalReport:
    mae_theta: float
    mae_psi: float
    mae_pi: float
    acc_theta: float
    precision_theta: float
    recall_theta: float
    acc_psi: float
    precision_psi: float
    recall_psi: float
    acc_union: float
    precision_union: float
    recall_union: float
    symdiff_theta: float
    symdiff_psi: float
    symdiff_union: float
    overlap: float
    edge_threshold: float
    acc_definition: str = ACC_DEFINITION

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def to_csv(self) -> str:
        """Header line plus one data row, keyed by field name."""
        buf = io.StringIO()
        names = [f.name for f in fields(self)]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                         for v in (self.to_dict()[k] for k in names)])
        return buf.getvalue()


def _snap(pi: np.ndarray) -> np.ndarray:
    # On the 2**-53 grid ``1 - p`` is exact, so relabeling twice is the identity.
    return np.round(np.asarray(pi, dtype=float) * 2.0**53) / 2.0**53


def _mae_or_nan(est, truth) -> float:
    try:
        return mae_rates(est, truth)
    except EmptySupport:
        return math.nan


def align(est: MixtureParams, truth: MixtureParams) -> MixtureParams:
    """Pick the labeling of ``est`` that best matches ``truth``.

    Candidates are ``est`` and its global swap ``(psi, theta, 1 - pi)``. The
    winner minimizes ``mae_theta + mae_psi``, then ``mae_pi``, then a
    byte-level tie-break, so an estimate and its swap always align to the
    same parameters.
    """
    if est.n_nodes != truth.n_nodes:
        raise ValidationError("estimate and truth have different node counts")
    pi = _snap(est.pi)
    true_pi = _snap(truth.pi)
    candidates = [MixtureParams(est.theta, est.psi, pi), MixtureParams(est.psi, est.theta, 1.0 - pi)]

    def key(p: MixtureParams):
        rate = _mae_or_nan(p.theta, truth.theta) + _mae_or_nan(p.psi, truth.psi)
        return (math.inf if math.isnan(rate) else rate, mae_pi(p.pi, true_pi),
                p.theta.tobytes(), p.pi.tobytes())

    return min(candidates, key=key)


def evaluate(est: MixtureParams, truth: MixtureParams,
             threshold: float = DEFAULT_THRESHOLD, aligned: bool = True) -> EvalReport:
    """Score an estimate against the truth (aligned first unless ``aligned=False``).

    A metric that is undefined because the true network is empty is NaN.
    Both pi vectors are compared on the ``2**-53`` grid used by :func:`align`.
    """
    if aligned:
        est = align(est, truth)
    th = topology_metrics(est.theta, truth.theta, threshold)
    ps = topology_metrics(est.psi, truth.psi, threshold)
    est_union = np.maximum(est.theta, est.psi)
    true_union = np.maximum(truth.theta, truth.psi)
    un = topology_metrics(est_union, true_union, threshold)
    return EvalReport(
        mae_theta=_mae_or_nan(est.theta, truth.theta),
        mae_psi=_mae_or_nan(est.psi, truth.psi),
        mae_pi=mae_pi(_snap(est.pi), _snap(truth.pi)),
        acc_theta=th[0], precision_theta=th[1], recall_theta=th[2],
        acc_psi=ps[0], precision_psi=ps[1], recall_psi=ps[2],
        acc_union=un[0], precision_union=un[1], recall_union=un[2],
        symdiff_theta=symdiff_ratio(est.theta, truth.theta, threshold),
        symdiff_psi=symdiff_ratio(est.psi, truth.psi, threshold),
        symdiff_union=symdiff_ratio(est_union, true_union, threshold),
        overlap=overlap(_support(est.theta, threshold), _support(est.psi, threshold)),
        edge_threshold=float(threshold),
    )
