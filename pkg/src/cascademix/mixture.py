"""Column-wise mixture of two diffusion networks.

Each node ``i`` in each cascade picks its incoming column from ``theta`` with
probability ``pi[i]`` and from ``psi`` otherwise, independently across nodes
and cascades. Because of that independence every likelihood and posterior here
is elementwise over (cascade, node); nothing enumerates indicator vectors.

All batch functions average over cascades (``1/C``) so their values do not
scale with the sample size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .hazard import HazardModel
from .likelihood import Cascade, CascadeBatch, WeightedObjective, as_batch, check_network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixtureParams:
    """Mixture parameters: networks ``theta`` and ``psi`` and node probabilities ``pi``."""

    theta: np.ndarray
    psi: np.ndarray
    pi: np.ndarray

    def __post_init__(self) -> None:
        theta = check_network(self.theta)
        psi = check_network(self.psi, n=theta.shape[0])
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (theta.shape[0],):
            raise ValidationError(f"pi must have shape ({theta.shape[0]},), got {pi.shape}")
        if not np.all((pi >= 0) & (pi <= 1)):
            raise ValidationError("pi entries must lie in [0, 1]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "pi", pi)

    @property
    def n_nodes(self) -> int:
        return self.theta.shape[0]

    def swapped(self) -> MixtureParams:
        """Relabel the two layers: ``(theta, psi, pi) -> (psi, theta, 1 - pi)``."""
        return MixtureParams(self.psi, self.theta, 1.0 - self.pi)


def mixed_network(params: MixtureParams, z: np.ndarray) -> np.ndarray:
    """Effective network of one cascade: column ``i`` from theta if ``z[i]`` else from psi."""
    z = np.asarray(z).astype(bool)
    if z.shape != (params.n_nodes,):
        raise ValidationError("indicator vector has the wrong length")
    return np.where(z[None, :], params.theta, params.psi)


def branch_logliks(params: MixtureParams, batch: CascadeBatch) -> tuple[np.ndarray, np.ndarray]:
    """Per-node terms ``(C, N)`` under theta and under psi."""
    return batch.node_loglik(params.theta), batch.node_loglik(params.psi)


def _node_marginals(params: MixtureParams, ll_theta: np.ndarray, ll_psi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        a = np.log(params.pi) + ll_theta
        b = np.log(1.0 - params.pi) + ll_psi
    out = np.logaddexp(a, b)
    # identical branches collapse exactly; keeps sources and parentless nodes at 0
    same = ll_theta == ll_psi
    return np.where(same, ll_theta, out)


def node_marginals(params: MixtureParams, cascades, model: HazardModel) -> np.ndarray:
    """Per-node marginal log-likelihood ``(C, N)`` with the indicator summed out."""
    batch = as_batch(cascades, model)
    return _node_marginals(params, *branch_logliks(params, batch))


def marginal_logliks(params: MixtureParams, cascades, model: HazardModel) -> np.ndarray:
    """Marginal log-likelihood of each cascade, shape ``(C,)``."""
    return node_marginals(params, cascades, model).sum(axis=1)


def marginal_loglik(params: MixtureParams, cascade: Cascade, model: HazardModel) -> float:
    """Marginal log-likelihood of a single cascade."""
    return float(marginal_logliks(params, cascade, model)[0])


def mean_marginal_loglik(params: MixtureParams, cascades, model: HazardModel) -> float:
    batch = as_batch(cascades, model)
    if batch.n_cascades == 0:
        raise ValidationError("no cascades")
    return float(np.mean(marginal_logliks(params, batch, model)))


def posteriors_from_branches(params: MixtureParams, ll_theta: np.ndarray,
                             ll_psi: np.ndarray) -> tuple[np.ndarray, int]:
    """Responsibilities from branch log-likelihoods; returns ``(resp, n_fallbacks)``."""
    pi = np.broadcast_to(params.pi, ll_theta.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_odds = (np.log(params.pi) + ll_theta) - (np.log(1.0 - params.pi) + ll_psi)
    resp = expit(log_odds)
    fallback = np.isneginf(ll_theta) & np.isneginf(ll_psi)
    resp = np.where(ll_theta == ll_psi, pi, resp)
    bad = fallback | np.isnan(resp)
    resp = np.where(bad, pi, resp)
    n_fallbacks = int(np.count_nonzero(bad))
    if n_fallbacks:
        log.debug("e-step fell back to the prior on %d node terms", n_fallbacks)
    return resp, n_fallbacks


def e_step(params: MixtureParams, cascades, model: HazardModel,
           return_fallbacks: bool = False):
    """Posterior probability that each node took its column from theta, shape ``(C, N)``.

    Sources and nodes without activated parents get their prior ``pi``. If both
    branches are impossible the prior is used as well and counted as a fallback.
    """
    batch = as_batch(cascades, model)
    resp, n_fallbacks = posteriors_from_branches(params, *branch_logliks(params, batch))
    return (resp, n_fallbacks) if return_fallbacks else resp


def _weighted_mean(weights: np.ndarray, values: np.ndarray) -> float:
    c = weights.shape[0]
    with np.errstate(invalid="ignore"):
        terms = np.where(weights > 0, weights * values, 0.0)
    return float(terms.sum() / c)


def _check_posteriors(posteriors: np.ndarray, batch: CascadeBatch) -> np.ndarray:
    posteriors = np.asarray(posteriors, dtype=float)
    if posteriors.shape != (batch.n_cascades, batch.n_nodes):
        raise ValidationError(f"posteriors must have shape {(batch.n_cascades, batch.n_nodes)}")
    if batch.n_cascades == 0:
        raise ValidationError("no cascades")
    return posteriors


def q_components(params: MixtureParams, posteriors: np.ndarray, cascades,
                 model: HazardModel) -> tuple[float, float, float]:
    """Expected complete-data log-likelihood split into its theta, psi and pi parts."""
    batch = as_batch(cascades, model)
    resp = _check_posteriors(posteriors, batch)
    ll_theta, ll_psi = branch_logliks(params, batch)
    q1 = _weighted_mean(resp, ll_theta)
    q2 = _weighted_mean(1.0 - resp, ll_psi)
    with np.errstate(divide="ignore"):
        q3 = _weighted_mean(resp, np.log(params.pi)) + _weighted_mean(1.0 - resp, np.log(1.0 - params.pi))
    return q1, q2, q3


def entropy(posteriors: np.ndarray) -> float:
    """Entropy of the factorized indicator distribution, averaged over cascades."""
    r = np.asarray(posteriors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(r > 0, r * np.log(r), 0.0) + np.where(r < 1, (1 - r) * np.log1p(-r), 0.0))
    return float(h.sum() / r.shape[0])


def elbo(params: MixtureParams, posteriors: np.ndarray, cascades, model: HazardModel) -> float:
    return sum(q_components(params, posteriors, cascades, model)) + entropy(posteriors)


def grad_q1(theta: np.ndarray, posteriors: np.ndarray, cascades, model: HazardModel) -> np.ndarray:
    """Gradient of the theta part with respect to theta."""
    batch = as_batch(cascades, model)
    resp = _check_posteriors(posteriors, batch)
    return WeightedObjective(batch, resp / batch.n_cascades).gradient(theta)


def grad_q2(psi: np.ndarray, posteriors: np.ndarray, cascades, model: HazardModel) -> np.ndarray:
    """Gradient of the psi part with respect to psi."""
    batch = as_batch(cascades, model)
    resp = _check_posteriors(posteriors, batch)
    return WeightedObjective(batch, (1.0 - resp) / batch.n_cascades).gradient(psi)
