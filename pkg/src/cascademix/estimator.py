"""Regularized EM for the two-layer mixture.

Each EM iteration computes responsibilities in closed form and then takes three
independent constrained ascent steps:

* theta: support-masked (or capped-l1) projected gradient ascent,
* psi: projected gradient ascent inside a nuclear-norm ball,
* pi: the clipped mean of the responsibilities.

Theta and psi use Armijo backtracking along the projection arc, so every
accepted step raises its part of the expected complete-data log-likelihood and
the marginal likelihood never decreases. The M-steps are therefore inexact
(generalized EM); ``inner_iters`` bounds the work per iteration.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateData, SvdFailure, ValidationError
from .hazard import HazardModel
from .likelihood import CascadeBatch, WeightedObjective, as_batch, as_cascade_set
from .mixture import MixtureParams, _node_marginals, entropy, posteriors_from_branches
from .projections import nuclear_norm, project_box_zero_diag, project_capped_l1, project_psi

log = logging.getLogger(__name__)

AUTO = "auto"
_NEGLIGIBLE = 1e-14
WEIGHT_FLOOR = 1e-10
_BIG = 1e300


@dataclass(frozen=True)
class Armijo:
    shrink: float = 0.5
    slope: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class EmConfig:
    """Settings for :func:`fit` and the helpers it drives.

    ``rho`` is the nuclear-norm radius of psi or ``"auto"`` for validation
    tuning over ``grid_size`` geometric points spanning ``grid_span`` (default
    ``[0.1, 2]``) times the nuclear norm of the initial psi. ``sparsity_s`` is the l1 radius of theta when no
    support mask is given (``None`` uses the l1 norm of the initial theta).
    """

    max_em_iters: int = 200
    inner_iters: int = 100
    elbo_tol: float = 1e-6
    inner_tol: float = 1e-9
    epsilon_clip: float = 0.01
    beta1: float = 10.0
    beta2: float = 10.0
    rho: float | str = AUTO
    sparsity_s: float | None = None
    armijo: Armijo = field(default_factory=Armijo)
    dykstra_passes: int = 0
    baseline_iters: int = 500
    baseline_tol: float = 1e-10
    grid_size: int = 8
    grid_span: tuple[float, float] = (0.1, 2.0)
    validation_split: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon_clip < 0.5:
            raise ValidationError("epsilon_clip must lie in (0, 0.5)")
        for name in ("elbo_tol", "inner_tol", "baseline_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ValidationError("box bounds must be positive")
        if isinstance(self.rho, str):
            if self.rho.lower() != AUTO:
                raise ValidationError(f"rho must be a number or 'auto', got {self.rho!r}")
            object.__setattr__(self, "rho", AUTO)
        elif not self.rho >= 0:
            raise ValidationError("rho must be nonnegative")
        if self.sparsity_s is not None and not self.sparsity_s > 0:
            raise ValidationError("sparsity_s must be positive")
        lo, hi = self.grid_span
        if not 0 < lo <= hi or self.grid_size < 1:
            raise ValidationError("grid_span must satisfy 0 < lo <= hi and grid_size >= 1")
        if not 0 < self.validation_split < 1:
            raise ValidationError("validation_split must lie in (0, 1)")


@dataclass
class FitResult:
    params: MixtureParams
    elbo_trace: list[float]
    marginal_trace: list[float]
    converged: bool
    iterations: int
    rho: float
    nuclear_trace: list[float] = field(default_factory=list)
    rho_scores: list[float] | None = None
    diagnostics: dict[str, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# projected gradient ascent


def projected_ascent(objective: WeightedObjective, x0: np.ndarray,
                     project: Callable[[np.ndarray], np.ndarray], *, max_iter: int,
                     tol: float, armijo: Armijo = Armijo(), separable: bool = False,
                     diagonal_newton: bool = False, upper: float = math.inf) -> np.ndarray:
    """Maximize a concave objective over a convex set from a feasible start.

    Each iteration projects a gradient step of Barzilai-Borwein length and
    then backtracks along the segment from the current point to that
    projection (Armijo rule along a feasible direction). Every trial point is
    a convex combination of feasible points, so it stays feasible even when
    ``project`` only maps into the set rather than projecting exactly, and
    positive entries never snap to zero mid-search.

    With ``separable=True`` the objective and constraint set must split by
    column; every column then gets its own step and its own line search.
    ``diagonal_newton=True`` first tries each gradient entry scaled by its
    inverse curvature, clipped to ``[0, upper]`` and passed through
    ``project``. For a pure box this is the exact scaled-metric projection
    and always ascends; otherwise, if its first-order gain is not positive,
    the iteration falls back to the plain BB target. The
    returned point is never worse than ``x0``; a start with value ``-inf`` is
    returned unchanged.
    """
    x = np.array(x0, dtype=float)
    fx = objective.column_values(x)
    if not np.all(np.isfinite(fx)):
        return x
    g = objective.gradient(x)
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if scale == 0.0:
        return x
    step = np.full(x.shape[1] if separable else 1, 1.0 / scale)

    def total(v):
        return v if separable else np.array([np.sum(v)])

    for _ in range(max_iter):
        gain = None
        if diagonal_newton:
            with np.errstate(divide="ignore", invalid="ignore"):
                scaled = np.where(g != 0, g / objective.curvature(x), 0.0)
            raw = np.clip(x + np.nan_to_num(scaled, posinf=_BIG, neginf=-_BIG), 0.0, upper)
            d = project(raw) - x
            gain = total(np.sum(g * d, axis=0))
            if not separable and not gain[0] > 0:
                gain = None
        if gain is None:
            raw = x + g * (step[None, :] if separable else step[0])
            lo = -upper if math.isfinite(upper) else -_BIG
            d = project(np.clip(np.nan_to_num(raw, posinf=_BIG, neginf=-_BIG), lo, upper)) - x
            gain = total(np.sum(g * d, axis=0))
        # a first-order gain at round-off level cannot pass the test: stationary
        pending = np.isfinite(gain) & (gain > _NEGLIGIBLE * np.maximum(1.0, np.abs(total(fx))))
        if not pending.any():
            break
        alpha = np.ones_like(gain)
        y, fy = x.copy(), fx.copy()
        for _ in range(armijo.max_backtracks):
            scale_cols = alpha if separable else np.full(x.shape[1], alpha[0])
            cand = x + d * scale_cols[None, :]
            fc = objective.column_values(cand)
            ok = pending & (total(fc) >= total(fx) + armijo.slope * alpha * gain)
            if separable:
                y[:, ok] = cand[:, ok]
                fy[ok] = fc[ok]
            elif ok[0]:
                y, fy = cand, fc
            pending &= ~ok
            if not pending.any():
                break
            alpha = np.where(pending, alpha * armijo.shrink, alpha)
        f_old, f_new = float(np.sum(fx)), float(np.sum(fy))
        if f_new <= f_old:
            break
        gy = objective.gradient(y)
        s_ = y - x
        curv = total(-np.sum(s_ * (gy - g), axis=0))
        ss = total(np.sum(s_ * s_, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            bb = np.where((curv > 0) & (ss > 0), ss / curv, 2.0 * step)
        # BB can overshoot badly after a backtrack; let the step grow at most 4x per iteration
        step = np.clip(np.minimum(bb, 4.0 * alpha * step), 1e-12, 1e12)
        x, fx, g = y, fy, gy
        if f_new - f_old <= tol * max(1.0, abs(f_new)):
            break
    return x


# ---------------------------------------------------------------------------
# M-steps


def branch_weights(resp: np.ndarray, branch_ll: np.ndarray) -> np.ndarray:
    """Responsibilities used as M-step weights for one layer.

    Terms the layer cannot explain (``-inf``) and terms with responsibility
    below ``WEIGHT_FLOOR`` are dropped. The latter matters in practice: an
    event carried only by a round-off-sized psi entry would otherwise pin that
    entry, since any projection that zeroes it sends the objective to ``-inf``.
    Dropping such a term moves the marginal likelihood by at most about its
    responsibility.
    """
    return np.where(np.isneginf(branch_ll) | (resp < WEIGHT_FLOOR), 0.0, resp)


def _theta_projection(mask: np.ndarray | None, config: EmConfig, radius: float | None):
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).copy()
        np.fill_diagonal(keep, False)
        return (lambda x: np.where(keep, np.clip(x, 0.0, config.beta1), 0.0)), True, keep

    def proj(x):
        y = x.copy()
        np.fill_diagonal(y, 0.0)
        out = project_capped_l1(y, radius, config.beta1)
        np.fill_diagonal(out, 0.0)
        return out

    return proj, False, None


def _theta_step(theta: np.ndarray, objective: WeightedObjective, mask, config: EmConfig,
                radius: float | None) -> np.ndarray:
    project, separable, _ = _theta_projection(mask, config, radius)
    return projected_ascent(objective, theta, project, max_iter=config.inner_iters,
                            tol=config.inner_tol, armijo=config.armijo, separable=separable,
                            diagonal_newton=True, upper=config.beta1)


def _support(mask: np.ndarray | None, n: int) -> np.ndarray:
    keep = np.ones((n, n), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    np.fill_diagonal(keep, False)
    return keep


def update_theta(theta: np.ndarray, posteriors: np.ndarray, cascades, model: HazardModel,
                 mask: np.ndarray | None = None, config: EmConfig = EmConfig()) -> np.ndarray:
    """One theta M-step: ascend the theta part of the expected log-likelihood.

    With a mask, off-mask entries are held at zero and the rest boxed to
    ``[0, beta1]``. Without one, theta is kept in the capped l1 ball of radius
    ``config.sparsity_s`` (default: the l1 norm of ``theta``).
    """
    batch = as_batch(cascades, model)
    theta = np.asarray(theta, dtype=float)
    weights = branch_weights(np.asarray(posteriors, dtype=float), batch.node_loglik(theta))
    weights /= batch.n_cascades
    objective = WeightedObjective(batch, weights, _support(mask, batch.n_nodes))
    radius = None if mask is not None else (config.sparsity_s or float(theta.sum()))
    return _theta_step(theta, objective, mask, config, radius)


def _psi_step(psi: np.ndarray, objective: WeightedObjective, rho: float, config: EmConfig) -> np.ndarray:
    def project(x):
        return project_psi(x, rho, config.beta2, config.dykstra_passes)

    try:
        return projected_ascent(objective, psi, project, max_iter=config.inner_iters,
                                tol=config.inner_tol, armijo=config.armijo, separable=False,
                                diagonal_newton=True, upper=config.beta2)
    except SvdFailure:
        log.warning("SVD failed during the psi update; keeping the previous iterate")
        raise


def _feasible_psi(psi: np.ndarray, rho: float, upper: float) -> np.ndarray:
    # clamp to the box, then shrink (rather than project) into the ball so the support survives
    psi = project_box_zero_diag(np.asarray(psi, dtype=float), upper)
    norm = nuclear_norm(psi)
    if norm > rho:
        psi = psi * (rho / norm) if rho > 0 else np.zeros_like(psi)
    return psi


def update_psi(psi: np.ndarray, posteriors: np.ndarray, cascades, model: HazardModel,
               rho: float, config: EmConfig = EmConfig()) -> np.ndarray:
    """One psi M-step inside ``{||psi||_* <= rho, 0 <= psi <= beta2}``.

    An infeasible start is clamped to the box and scaled into the ball first.
    On SVD failure that feasible start is returned.
    """
    batch = as_batch(cascades, model)
    psi = _feasible_psi(psi, rho, config.beta2)
    weights = branch_weights(1.0 - np.asarray(posteriors, dtype=float), batch.node_loglik(psi))
    weights /= batch.n_cascades
    objective = WeightedObjective(batch, weights, _support(None, batch.n_nodes))
    try:
        return _psi_step(psi, objective, rho, config)
    except SvdFailure:
        return psi.copy()


def update_pi(posteriors: np.ndarray, config: EmConfig = EmConfig()) -> np.ndarray:
    """Closed-form pi step: the cascade-mean responsibility clipped to ``[eps, 1 - eps]``."""
    r = np.asarray(posteriors, dtype=float)
    if r.ndim != 2 or r.shape[0] == 0:
        raise ValidationError("posteriors must be a non-empty (C, N) array")
    eps = config.epsilon_clip
    return np.clip(r.mean(axis=0), eps, 1.0 - eps)


# ---------------------------------------------------------------------------
# single-network baseline


def _check_informative(batch: CascadeBatch) -> None:
    if batch.n_cascades == 0 or batch.n_events == 0:
        raise DegenerateData("no cascade has two or more activated nodes")


def baseline_fit(cascades, model: HazardModel, config: EmConfig = EmConfig(),
                 support: np.ndarray | None = None) -> np.ndarray:
    """Single-network maximum likelihood with rates boxed to ``[0, beta1]``.

    Starts from the constant network that is the exact maximizer among
    constant networks (events over total exposure) and runs column-wise
    projected gradient ascent.
    """
    batch = as_batch(cascades, model)
    _check_informative(batch)
    n = batch.n_nodes
    keep = _support(support, n)
    weights = np.full((batch.n_cascades, n), 1.0 / batch.n_cascades)
    objective = WeightedObjective(batch, weights, keep)
    exposure = float(np.sum(objective.linear))
    rate0 = batch.n_events / batch.n_cascades / exposure if exposure > 0 else 1.0
    start = np.where(keep, min(rate0, config.beta1), 0.0)

    def project(x):
        return np.where(keep, np.clip(x, 0.0, config.beta1), 0.0)

    return projected_ascent(objective, start, project, max_iter=config.baseline_iters,
                            tol=config.baseline_tol, armijo=config.armijo, separable=True,
                            diagonal_newton=True, upper=config.beta1)


def split_initial(network: np.ndarray, mask: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Split a single-network estimate into starting theta and psi.

    With a mask: ``theta = E * A`` and ``psi = E * (1 - A)``. Without one,
    entries at or above the median nonzero rate go to theta and the rest to psi.
    """
    network = np.asarray(network, dtype=float)
    if mask is not None:
        a = np.asarray(mask, dtype=bool)
    else:
        nz = network[network > 0]
        a = network >= np.median(nz) if nz.size else np.zeros_like(network, dtype=bool)
    return np.where(a, network, 0.0), np.where(a, 0.0, network)


# ---------------------------------------------------------------------------
# EM


class _Branches(NamedTuple):
    theta: np.ndarray
    psi: np.ndarray


def _mean_marginal(params: MixtureParams, br: _Branches, batch: CascadeBatch) -> float:
    node = _node_marginals(params, br.theta, br.psi)
    node = np.where(batch.dead, 0.0, node)
    return float(node.sum() / batch.n_cascades)


def _elbo(params: MixtureParams, br: _Branches, resp: np.ndarray) -> float:
    c = resp.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (np.where(resp > 0, resp * (br.theta + np.log(params.pi)), 0.0)
                 + np.where(resp < 1, (1 - resp) * (br.psi + np.log(1.0 - params.pi)), 0.0))
    return float(terms.sum() / c) + entropy(resp)


def _run_em(batch: CascadeBatch, theta0: np.ndarray, psi0: np.ndarray, pi0: np.ndarray,
            mask: np.ndarray | None, rho: float, config: EmConfig) -> FitResult:
    n, c = batch.n_nodes, batch.n_cascades
    support_theta = _support(mask, n)
    support_psi = _support(None, n)
    radius = None
    if mask is None:
        radius = config.sparsity_s if config.sparsity_s is not None else float(theta0.sum())
        total = float(theta0.sum())
        if total > radius:
            theta0 = theta0 * (radius / total)
    psi0 = _feasible_psi(psi0, rho, config.beta2)
    params = MixtureParams(theta0, psi0, pi0)
    br = _Branches(batch.node_loglik(params.theta), batch.node_loglik(params.psi))
    diag = {"fallbacks": 0, "svd_failures": 0, "nuclear_violations": 0,
            "unexplainable_terms": 0, "dead_terms": int(batch.dead.sum())}
    current = _mean_marginal(params, br, batch)
    marginal_trace = [current]
    elbo_trace: list[float] = []
    nuclear_trace = [nuclear_norm(params.psi)]
    best, best_value = params, current
    converged = False
    iterations = 0
    for iterations in range(1, config.max_em_iters + 1):
        resp, n_fb = posteriors_from_branches(params, br.theta, br.psi)
        diag["fallbacks"] += n_fb
        w_theta = branch_weights(resp, br.theta) / c
        w_psi = branch_weights(1.0 - resp, br.psi) / c
        obj_theta = WeightedObjective(batch, w_theta, support_theta)
        obj_psi = WeightedObjective(batch, w_psi, support_psi)
        diag["unexplainable_terms"] += obj_theta.n_unexplainable + obj_psi.n_unexplainable
        theta = _theta_step(params.theta, obj_theta, mask, config, radius)
        try:
            psi = _psi_step(params.psi, obj_psi, rho, config)
        except SvdFailure:
            diag["svd_failures"] += 1
            psi = params.psi
        pi = update_pi(resp, config)
        params = MixtureParams(theta, psi, pi)
        br = _Branches(batch.node_loglik(theta), batch.node_loglik(psi))
        elbo_trace.append(_elbo(params, br, resp))
        value = _mean_marginal(params, br, batch)
        marginal_trace.append(value)
        norm = nuclear_norm(psi)
        nuclear_trace.append(norm)
        if norm > rho * (1 + 1e-8):
            diag["nuclear_violations"] += 1
        if value > best_value:
            best, best_value = params, value
        if abs(value - current) <= config.elbo_tol * max(1.0, abs(current)):
            converged = True
            current = value
            break
        current = value
    return FitResult(best, elbo_trace, marginal_trace, converged, iterations, rho,
                     nuclear_trace=nuclear_trace, diagnostics=diag)


def _initial(batch: CascadeBatch, mask, config: EmConfig):
    """Starting ``(theta, psi, pi, baseline)`` from the single-network fit split by the mask."""
    base = baseline_fit(batch, batch.model, config)
    theta0, psi0 = split_initial(base, mask)
    return theta0, psi0, np.full(batch.n_nodes, 0.5), base


def _psi_start(psi0: np.ndarray, base: np.ndarray, rho: float) -> np.ndarray:
    """Psi start for radius ``rho``.

    An all-zero psi is a fixed point of EM: every event is impossible under
    psi, drops out of its M-step, and the remaining survival terms only push
    psi down. When the split leaves psi empty but the radius allows mass, psi
    starts from the whole baseline instead (it is scaled into the ball later).
    """
    if rho > 0 and not np.any(psi0 > 0):
        return base
    return psi0


def _check_mask(mask, n: int) -> np.ndarray | None:
    if mask is None:
        return None
    mask = np.asarray(mask)
    if mask.shape != (n, n):
        raise ValidationError(f"mask must have shape {(n, n)}")
    if np.any(np.diag(mask) != 0):
        raise ValidationError("mask must have a zero diagonal")
    return mask.astype(bool)


def default_grid(psi0: np.ndarray, size: int = 8, span: tuple[float, float] = (0.1, 2.0)) -> list[float]:
    """Geometric radius grid ``span`` times the nuclear norm of the starting psi."""
    base = nuclear_norm(psi0)
    if base == 0:
        return [0.0]
    return [float(v) for v in np.geomspace(span[0], span[1], size) * base]


def _validation_key(values: np.ndarray) -> tuple[int, float]:
    finite = np.isfinite(values)
    mean = float(values[finite].mean()) if finite.any() else -math.inf
    return int(np.count_nonzero(~finite)), mean


def tune_rho(cascades, model: HazardModel, mask: np.ndarray | None = None,
             config: EmConfig = EmConfig(), grid: Sequence[float] | None = None,
             split: float | None = None, threads: int = 1, return_grid: bool = False):
    """Pick the nuclear-norm radius by held-out marginal log-likelihood.

    Cascades are shuffled with ``config.seed`` and split into a training part
    (fraction ``split``) and a validation part. Every radius is fitted on the
    training part from the same start and scored on the validation part. The
    winner has the fewest impossible validation cascades, then the highest
    mean log-likelihood over the rest; ties go to the smaller radius and then
    the earlier grid entry.

    Returns the chosen radius and the mean validation log-likelihood per grid
    entry (``-inf`` where some validation cascade is impossible), plus the
    grid itself when ``return_grid`` is set. Grid fits
    are independent; ``threads > 1`` runs them in a thread pool and the result
    does not depend on the thread count.
    """
    cset = as_cascade_set(cascades)
    split = config.validation_split if split is None else split
    if not 0 < split < 1:
        raise ValidationError("split must lie in (0, 1)")
    if grid is not None and len(grid) == 0:
        raise ValidationError("grid must not be empty")
    c = cset.n_cascades
    if c < 2:
        raise DegenerateData("need at least two cascades to hold some out")
    mask = _check_mask(mask, cset.n_nodes)
    order = np.random.default_rng(config.seed).permutation(c)
    n_train = min(max(int(round(split * c)), 1), c - 1)
    train = as_batch(cset[np.sort(order[:n_train])], model)
    valid = as_batch(cset[np.sort(order[n_train:])], model)
    theta0, psi0, pi0, base = _initial(train, mask, config)
    grid = default_grid(psi0, config.grid_size, config.grid_span) if grid is None else [float(g) for g in grid]

    def run(rho: float) -> MixtureParams:
        return _run_em(train, theta0, _psi_start(psi0, base, rho), pi0, mask, rho, config).params

    if threads > 1 and len(grid) > 1:
        # build the shared sparse operators once, before the workers need them
        for support in (_support(mask, cset.n_nodes), _support(None, cset.n_nodes)):
            train.hazard_operator(support)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = list(pool.map(run, grid))
    else:
        fitted = [run(rho) for rho in grid]
    scores: list[float] = []
    best_rho, best_key = None, None
    for rho, p in zip(grid, fitted):
        values = _node_marginals(p, valid.node_loglik(p.theta), valid.node_loglik(p.psi)).sum(axis=1)
        n_bad, mean = _validation_key(values)
        scores.append(float(values.mean()))
        key = (n_bad, -mean, rho)
        log.info("rho=%.4g validation loglik=%.6g impossible=%d", rho, mean, n_bad)
        if best_key is None or key < best_key:
            best_rho, best_key = rho, key
    if return_grid:
        return float(best_rho), scores, list(grid)
    return float(best_rho), scores


def fit(cascades, model: HazardModel, mask: np.ndarray | None = None,
        config: EmConfig = EmConfig(), threads: int = 1) -> FitResult:
    """Estimate ``(theta, psi, pi)`` by regularized EM.

    Starts from the single-network baseline split by ``mask`` and returns the
    best parameters seen (by mean marginal log-likelihood). With
    ``config.rho == "auto"`` the radius is chosen by :func:`tune_rho` first.
    """
    batch = as_batch(cascades, model)
    _check_informative(batch)
    mask = _check_mask(mask, batch.n_nodes)
    if mask is None:
        log.info("no support mask given; theta is constrained by an l1 budget instead")
    rho_scores = None
    rho = config.rho
    if rho == AUTO:
        rho, rho_scores = tune_rho(batch.cascades, model, mask, config, threads=threads)
    theta0, psi0, pi0, base = _initial(batch, mask, config)
    rho = float(rho)
    result = _run_em(batch, theta0, _psi_start(psi0, base, rho), pi0, mask, rho, config)
    result.rho_scores = rho_scores
    return result


def fit_with(batch: CascadeBatch, init: MixtureParams, mask: np.ndarray | None, rho: float,
             config: EmConfig) -> FitResult:
    """EM from explicit starting parameters (no baseline, no tuning)."""
    mask = _check_mask(mask, batch.n_nodes)
    return _run_em(batch, init.theta, init.psi, init.pi, mask, rho, config)


# ---------------------------------------------------------------------------
# identifiability


class IdentifiabilityReport(NamedTuple):
    degree_term: float
    incoherence_term: float
    product: float

    @property
    def flagged(self) -> bool:
        """True when the surrogate fails to certify identifiability."""
        return self.product >= 1.0


def identifiability_diagnostic(mask: np.ndarray, psi: np.ndarray, rank_tol: float = 1e-10
                               ) -> IdentifiabilityReport:
    """Upper-bound surrogates for the rank-sparsity separation condition.

    ``degree_term = sqrt(max row degree * max column degree)`` bounds the
    spectral norm of any matrix supported on the mask with entries in
    ``[-1, 1]``. ``incoherence_term = 2 * max(max_i ||U_i||, max_i ||V_i||)``
    over the row norms of the leading singular vectors of ``psi`` bounds the
    largest entry of any unit-spectral-norm matrix in psi's tangent space.
    Their product below 1 is a sufficient (not necessary) condition.
    """
    a = np.asarray(mask) != 0
    if a.any():
        degree = math.sqrt(float(a.sum(axis=1).max()) * float(a.sum(axis=0).max()))
    else:
        degree = 0.0
    psi = np.asarray(psi, dtype=float)
    u, sig, vt = np.linalg.svd(psi)
    r = int(np.count_nonzero(sig > rank_tol * sig[0])) if sig.size and sig[0] > 0 else 0
    if r == 0:
        inc = 0.0
    else:
        inc = 2.0 * max(float(np.linalg.norm(u[:, :r], axis=1).max()),
                        float(np.linalg.norm(vt[:r].T, axis=1).max()))
    return IdentifiabilityReport(degree, inc, degree * inc)


def with_rho(config: EmConfig, rho: float) -> EmConfig:
    return replace(config, rho=rho)
