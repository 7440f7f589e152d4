"""Single-network cascade likelihood.

A network is a dense ``(N, N)`` nonnegative array ``E`` with ``E[j, i]`` the
rate from sender ``j`` to receiver ``i``. A cascade is a length-``N`` vector of
activation times in ``[0, T]``; nodes not activated inside the window carry
exactly ``T``.

Two layers live here. The scalar functions (:func:`log_p_activated`,
:func:`log_p_censored`, :func:`cascade_loglik`, :func:`grad_column`) follow the
per-node definitions directly and double as readable references. The
:class:`CascadeBatch` engine evaluates the same quantities for many cascades
at once from precomputed (cascade, parent, child) triplets; the mixture and
estimator modules only use the batch path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from .errors import SourceNode, ValidationError
from .hazard import HazardModel

DEFAULT_BOX = 10.0


def check_network(net: np.ndarray, n: int | None = None, bound: float | None = None) -> np.ndarray:
    """Validate a diffusion network and return it as a float array."""
    net = np.asarray(net, dtype=float)
    if net.ndim != 2 or net.shape[0] != net.shape[1]:
        raise ValidationError(f"network must be square, got shape {net.shape}")
    if n is not None and net.shape[0] != n:
        raise ValidationError(f"network has {net.shape[0]} nodes, expected {n}")
    if not np.all(np.isfinite(net)) or np.any(net < 0):
        raise ValidationError("network entries must be finite and nonnegative")
    if np.any(np.diag(net) != 0):
        raise ValidationError("network must have a zero diagonal")
    if bound is not None and np.any(net > bound):
        raise ValidationError(f"network entries exceed the box bound {bound}")
    return net


@dataclass(frozen=True)
class Cascade:
    """Activation times of one cascade observed on ``[0, window]``."""

    times: np.ndarray
    window: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        _validate_times(times[None, :] if times.ndim == 1 else times, self.window)
        if times.ndim != 1:
            raise ValidationError("cascade times must be one-dimensional")

    @property
    def n_nodes(self) -> int:
        return self.times.shape[0]

    @property
    def activated(self) -> np.ndarray:
        return self.times < self.window


def _validate_times(times: np.ndarray, window: float) -> None:
    if not (math.isfinite(window) and window > 0):
        raise ValidationError("window must be finite and positive")
    if times.ndim != 2:
        raise ValidationError("cascade times must be a (C, N) array")
    if not np.all(np.isfinite(times)):
        raise ValidationError("cascade times must be finite")
    if np.any(times < 0) or np.any(times > window):
        raise ValidationError("cascade times must lie in [0, window]")
    if times.shape[0] and not np.all(np.any(times == 0, axis=1)):
        raise ValidationError("every cascade needs a source activated at time 0")


@dataclass(frozen=True)
class CascadeSet:
    """``C`` cascades over the same ``N`` nodes and window, stored as a ``(C, N)`` array."""

    times: np.ndarray
    window: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim == 1 and times.size == 0:
            raise ValidationError("an empty cascade set needs an explicit (0, N) shape")
        object.__setattr__(self, "times", times)
        _validate_times(times, self.window)

    @classmethod
    def from_cascades(cls, cascades: Sequence[Cascade]) -> CascadeSet:
        if not cascades:
            raise ValidationError("cannot infer N and window from an empty list")
        windows = {c.window for c in cascades}
        if len(windows) != 1:
            raise ValidationError("all cascades in a set must share one window")
        return cls(np.vstack([c.times for c in cascades]), cascades[0].window)

    @property
    def n_cascades(self) -> int:
        return self.times.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.times.shape[1]

    def __len__(self) -> int:
        return self.n_cascades

    def __iter__(self) -> Iterator[Cascade]:
        for row in self.times:
            yield Cascade(row, self.window)

    def __getitem__(self, idx) -> CascadeSet:
        sub = self.times[idx]
        if sub.ndim == 1:
            sub = sub[None, :]
        return CascadeSet(sub, self.window)

    def n_activated(self) -> np.ndarray:
        return np.sum(self.times < self.window, axis=1)


def as_cascade_set(cascades: CascadeSet | Cascade | Iterable[Cascade]) -> CascadeSet:
    if isinstance(cascades, CascadeSet):
        return cascades
    if isinstance(cascades, CascadeBatch):
        return cascades.cascades
    if isinstance(cascades, Cascade):
        return CascadeSet(cascades.times[None, :], cascades.window)
    return CascadeSet.from_cascades(list(cascades))


# ---------------------------------------------------------------------------
# per-node reference formulas


def _parent_lags(cascade: Cascade, i: int, at: float) -> tuple[np.ndarray, np.ndarray]:
    t = cascade.times
    parents = np.flatnonzero(t < at)
    parents = parents[parents != i]
    return parents, at - t[parents]


def log_p_activated(column: np.ndarray, cascade: Cascade, i: int, model: HazardModel) -> float:
    """Log-density of node ``i`` activating at ``t_i`` given the earlier activations.

    Raises :class:`SourceNode` when nothing precedes ``t_i``.
    """
    column = np.asarray(column, dtype=float)
    ti = cascade.times[i]
    if ti >= cascade.window:
        raise ValidationError(f"node {i} is censored in this cascade")
    parents, lag = _parent_lags(cascade, i, ti)
    if parents.size == 0:
        raise SourceNode(f"node {i} has no earlier activated node")
    rates = column[parents]
    total_hazard = float(np.sum(rates * model.hazard_factor(lag)))
    if total_hazard <= 0.0:
        return -math.inf
    return -float(np.sum(rates * model.cumulative_factor(lag))) + math.log(total_hazard)


def log_p_censored(column: np.ndarray, cascade: Cascade, i: int, model: HazardModel) -> float:
    """Log-probability that node ``i`` survives every activated parent through the window."""
    column = np.asarray(column, dtype=float)
    if cascade.times[i] < cascade.window:
        raise ValidationError(f"node {i} is activated in this cascade")
    parents, lag = _parent_lags(cascade, i, cascade.window)
    if parents.size == 0:
        return 0.0
    return -float(np.sum(column[parents] * model.cumulative_factor(lag)))


def is_source(cascade: Cascade, i: int) -> bool:
    t = cascade.times
    return bool(t[i] < cascade.window and not np.any(np.delete(t, i) < t[i]))


def node_loglik(column: np.ndarray, cascade: Cascade, i: int, model: HazardModel) -> float:
    """Node ``i``'s likelihood term; sources contribute 0."""
    if cascade.times[i] >= cascade.window:
        return log_p_censored(column, cascade, i, model)
    if is_source(cascade, i):
        return 0.0
    return log_p_activated(column, cascade, i, model)


def cascade_loglik(net: np.ndarray, cascade: Cascade, model: HazardModel) -> float:
    """Log-likelihood of one cascade under one network; sources are excluded."""
    net = np.asarray(net, dtype=float)
    return float(sum(node_loglik(net[:, i], cascade, i, model) for i in range(cascade.n_nodes)))


def grad_column(column: np.ndarray, cascade: Cascade, i: int, model: HazardModel,
                weight: float = 1.0) -> np.ndarray:
    """``weight`` times the gradient of node ``i``'s term with respect to column ``i``."""
    column = np.asarray(column, dtype=float)
    out = np.zeros_like(column)
    t = cascade.times
    censored = t[i] >= cascade.window
    if not censored and is_source(cascade, i):
        return out
    parents, lag = _parent_lags(cascade, i, cascade.window if censored else t[i])
    if parents.size == 0:
        return out
    grad = -model.cumulative_factor(lag)
    if not censored:
        h = model.hazard_factor(lag)
        total = float(np.sum(column[parents] * h))
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = grad + np.where(h > 0, h / total, 0.0)
    out[parents] = weight * grad
    return out


# ---------------------------------------------------------------------------
# batch engine

_CHUNK_ELEMS = 4_000_000


@dataclass
class CascadeBatch:
    """Precomputed lag structure of a cascade set under one hazard model.

    Survival triplets cover every (cascade ``c``, parent ``j``, node ``i``) with
    ``t_j < t_i`` and a nonzero cumulative factor; node ``i`` may be activated or
    censored. Hazard triplets cover the same pairs for activated non-source
    nodes ("events") where the hazard factor is nonzero.
    """

    cascades: CascadeSet
    model: HazardModel
    activated: np.ndarray = field(init=False, repr=False)
    source: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.cascades = as_cascade_set(self.cascades)
        t = self.cascades.times
        c_count, n = t.shape
        window = self.cascades.window
        self.n_cascades, self.n_nodes = c_count, n
        self.activated = t < window
        if c_count:
            self.source = self.activated & (t == t.min(axis=1, keepdims=True))
        else:
            self.source = np.zeros_like(self.activated)
        self.informative = ~self.source
        events = self.activated & ~self.source
        self.ev_c, self.ev_i = np.nonzero(events)
        self.n_events = self.ev_c.size
        ev_id = np.full((c_count, n), -1, dtype=np.int64)
        ev_id[self.ev_c, self.ev_i] = np.arange(self.n_events)

        sv_c, sv_j, sv_i, sv_g = [], [], [], []
        hz_k, hz_j, hz_h = [], [], []
        step = max(1, _CHUNK_ELEMS // max(1, n * n))
        for lo in range(0, c_count, step):
            tc = t[lo:lo + step]
            lag = tc[:, None, :] - tc[:, :, None]  # [c, j, i] = t_i - t_j
            ahead = lag > 0
            g = np.where(ahead, self.model.cumulative_factor(lag), 0.0)
            c, j, i = np.nonzero(g > 0)
            sv_c.append(c + lo)
            sv_j.append(j)
            sv_i.append(i)
            sv_g.append(g[c, j, i])
            h = np.where(ahead & events[lo:lo + step, None, :], self.model.hazard_factor(lag), 0.0)
            c, j, i = np.nonzero(h > 0)
            hz_k.append(ev_id[c + lo, i])
            hz_j.append(j)
            hz_h.append(h[c, j, i])

        def cat(parts, dtype):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)

        sv_c, sv_j, sv_i = cat(sv_c, np.int64), cat(sv_j, np.int64), cat(sv_i, np.int64)
        self.sv_g = cat(sv_g, float)
        self.sv_ci = sv_c * n + sv_i
        self.sv_ji = sv_j * n + sv_i
        self.hz_k = cat(hz_k, np.int64)
        hz_j = cat(hz_j, np.int64)
        self.hz_h = cat(hz_h, float)
        self.hz_ji = hz_j * n + self.ev_i[self.hz_k]
        # events no network can explain (e.g. every parent inside the pow delay)
        self.dead_events = np.bincount(self.hz_k, minlength=self.n_events) == 0
        self.dead = np.zeros((c_count, n), dtype=bool)
        self.dead[self.ev_c[self.dead_events], self.ev_i[self.dead_events]] = True
        size = c_count * n
        # sparse operators: survival sums = S @ vec(net), event hazards = H @ vec(net)
        self._surv = sparse.csr_matrix((self.sv_g, (self.sv_ci, self.sv_ji)), shape=(size, n * n))
        self._surv_t = self._surv.T.tocsr()
        self._haz = sparse.csr_matrix((self.hz_h, (self.hz_k, self.hz_ji)), shape=(self.n_events, n * n))
        self._operators: dict[bytes | None, tuple] = {}

    @property
    def window(self) -> float:
        return self.cascades.window

    def survival_sums(self, net: np.ndarray) -> np.ndarray:
        """``S[c, i] = sum_j net[j, i] * g(t_i - t_j)``, i.e. minus the log-survival part."""
        flat = np.ascontiguousarray(net, dtype=float).ravel()
        return (self._surv @ flat).reshape(self.n_cascades, self.n_nodes)

    def hazard_sums(self, net: np.ndarray) -> np.ndarray:
        """Total hazard of each event at its activation time, shape ``(n_events,)``."""
        return self._haz @ np.ascontiguousarray(net, dtype=float).ravel()

    def node_loglik(self, net: np.ndarray) -> np.ndarray:
        """Per-node terms ``(C, N)``: log P_I for events, log P_U for censored nodes, 0 for sources."""
        out = -self.survival_sums(net)
        with np.errstate(divide="ignore"):
            out[self.ev_c, self.ev_i] += np.log(self.hazard_sums(net))
        return out

    def loglik(self, net: np.ndarray) -> np.ndarray:
        """Per-cascade log-likelihood, shape ``(C,)``."""
        return self.node_loglik(net).sum(axis=1)

    def weighted_cumulative(self, weights: np.ndarray) -> np.ndarray:
        """``sum_c weights[c, i] * g(t_i - t_j)`` accumulated into an ``(N, N)`` array."""
        w = np.ascontiguousarray(weights, dtype=float).ravel()
        n = self.n_nodes
        return (self._surv_t @ w).reshape(n, n)

    def hazard_operator(self, support: np.ndarray | None = None):
        """Event-hazard matrix on ``support``: the matrix, its transpose, the transpose of its
        elementwise square, and which events have at least one entry.

        Cached per support pattern, since EM reuses the same supports every iteration.
        """
        key = None if support is None else np.asarray(support, dtype=bool).tobytes()
        if key not in self._operators:
            m = self._haz
            if support is not None:
                keep = np.asarray(support, dtype=bool).ravel()
                m = (m @ sparse.diags(keep.astype(float))).tocsr()
                m.eliminate_zeros()
            reach = np.diff(m.indptr) > 0
            self._operators[key] = (m, m.T.tocsr(), m.multiply(m).T.tocsr(), reach)
        return self._operators[key]


def as_batch(cascades, model: HazardModel) -> CascadeBatch:
    if isinstance(cascades, CascadeBatch):
        if cascades.model != model:
            raise ValidationError("cascade batch was prepared for a different hazard model")
        return cascades
    return CascadeBatch(as_cascade_set(cascades), model)


class WeightedObjective:
    """Concave weighted log-likelihood ``sum_{c,i} W[c,i] * ell_ci(E)``.

    ``support`` (boolean ``(N, N)``) restricts which entries of ``E`` are free;
    entries outside it are treated as fixed zeros. Terms with zero weight are
    dropped, so ``0 * log 0`` counts as 0. Events whose total hazard is zero
    for every network on the support carry a constant ``-inf`` and are dropped
    as well; their count is kept in ``n_unexplainable``.
    """

    def __init__(self, batch: CascadeBatch, weights: np.ndarray, support: np.ndarray | None = None):
        n = batch.n_nodes
        w = np.where(batch.informative, np.asarray(weights, dtype=float), 0.0)
        self.n = n
        self.support = None if support is None else np.asarray(support, dtype=bool)
        self.linear = batch.weighted_cumulative(w)
        if self.support is not None:
            self.linear = np.where(self.support, self.linear, 0.0)
        w_ev = w[batch.ev_c, batch.ev_i]
        self._m, self._mt, self._m2t, reach = batch.hazard_operator(self.support)
        self.n_unexplainable = int(np.count_nonzero((w_ev > 0) & ~reach))
        self._w = np.where(reach, w_ev, 0.0)
        self._live = self._w > 0
        self._col = batch.ev_i

    def _hazards(self, net: np.ndarray) -> np.ndarray:
        return self._m @ np.ascontiguousarray(net, dtype=float).ravel()

    def column_values(self, net: np.ndarray) -> np.ndarray:
        """Objective split by receiving node (column); the columns are separable."""
        net = np.asarray(net, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(self._live, self._w * np.log(self._hazards(net)), 0.0)
        return -np.sum(net * self.linear, axis=0) + np.bincount(self._col, logs, minlength=self.n)

    def value(self, net: np.ndarray) -> float:
        return float(np.sum(self.column_values(net)))

    def curvature(self, net: np.ndarray) -> np.ndarray:
        """Negated Hessian diagonal ``sum_k w_k h_kj^2 / lambda_k^2`` (zero off the support)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            hz = self._hazards(net)
            coef = np.where(self._live, self._w / (hz * hz), 0.0)
        return (self._m2t @ coef).reshape(self.n, self.n)

    def gradient(self, net: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(self._live, self._w / self._hazards(net), 0.0)
        g = (self._mt @ coef).reshape(self.n, self.n) - self.linear
        if self.support is not None:
            g = np.where(self.support, g, 0.0)
        return g
