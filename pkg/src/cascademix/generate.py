"""Synthetic networks: sparse supports, low-rank latent networks, overlap control.

All generators take a ``numpy.random.Generator`` and are otherwise pure, so
the caller decides how random streams are split.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import networkx as nx
import numpy as np

from .errors import GenerationFailure, ValidationError
from .mixture import MixtureParams


@dataclass(frozen=True)
class ER:
    """Directed Erdos-Renyi: every ordered pair ``j != i`` is an edge with probability ``p``."""

    p: float = 0.01


@dataclass(frozen=True)
class SBM:
    """Directed stochastic block model with ``k`` (nearly) equal blocks."""

    k: int = 4
    p_in: float = 0.05
    p_out: float = 0.01


@dataclass(frozen=True)
class BA:
    """Barabasi-Albert preferential attachment; each edge points from the newer node to the older one."""

    m: int = 1


Topology = Union[ER, SBM, BA]


@dataclass(frozen=True)
class GenSpec:
    n: int
    topology: Topology = field(default_factory=ER)
    weight_range: tuple[float, float] = (1.0, 5.0)
    psi_rank: int = 5
    factor_density: float = 0.1
    factor_range: tuple[float, float] = (1.0, 2.0)
    target_overlap: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if self.psi_rank < 1:
            raise ValidationError("psi_rank must be at least 1")
        for name in ("weight_range", "factor_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValidationError(f"{name} must satisfy 0 < lo <= hi")
        probs = [self.factor_density]
        top = self.topology
        if isinstance(top, ER):
            probs.append(top.p)
        elif isinstance(top, SBM):
            probs += [top.p_in, top.p_out]
            if top.k < 1:
                raise ValidationError("SBM needs at least one block")
        elif isinstance(top, BA):
            if not 1 <= top.m < max(self.n, 2):
                raise ValidationError("BA needs 1 <= m < n")
        else:
            raise ValidationError(f"unknown topology {top!r}")
        if not all(0.0 <= p <= 1.0 for p in probs):
            raise ValidationError("probabilities must lie in [0, 1]")
        if self.target_overlap is not None and not 0.0 <= self.target_overlap <= 1.0:
            raise ValidationError("target_overlap must lie in [0, 1]")


def _off_diagonal(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def gen_mask(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    """Boolean support matrix with zero diagonal; ``mask[j, i]`` means edge ``j -> i``."""
    n, top = spec.n, spec.topology
    if isinstance(top, ER):
        mask = rng.random((n, n)) < top.p
    elif isinstance(top, SBM):
        block = np.arange(n) * top.k // n
        prob = np.where(block[:, None] == block[None, :], top.p_in, top.p_out)
        mask = rng.random((n, n)) < prob
    else:
        mask = np.zeros((n, n), dtype=bool)
        if n > 1:
            g = nx.barabasi_albert_graph(n, top.m, seed=int(rng.integers(2**32)))
            for u, v in g.edges():
                mask[max(u, v), min(u, v)] = True
    mask &= _off_diagonal(n)
    return mask


def weights_on(mask: np.ndarray, value_range: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """Uniform weights on the support; one draw per cell so consumption depends only on shape."""
    lo, hi = value_range
    return np.where(mask, rng.uniform(lo, hi, size=mask.shape), 0.0)


def gen_theta(spec: GenSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sparse network: ``(mask, theta)`` with weights uniform on ``spec.weight_range``."""
    mask = gen_mask(spec, rng)
    return mask, weights_on(mask, spec.weight_range, rng)


def gen_psi(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    """Low-rank network ``psi1 @ psi2.T`` with sparse nonnegative factors and a zeroed diagonal."""
    n, r = spec.n, spec.psi_rank
    factors = []
    for _ in range(2):
        keep = rng.random((n, r)) < spec.factor_density
        factors.append(weights_on(keep, spec.factor_range, rng))
    psi = factors[0] @ factors[1].T
    np.fill_diagonal(psi, 0.0)
    return psi


def density(net: np.ndarray) -> float:
    """Fraction of off-diagonal cells that are nonzero."""
    net = np.asarray(net)
    n = net.shape[0]
    if n < 2:
        return 0.0
    return float(np.count_nonzero(net[_off_diagonal(n)])) / (n * (n - 1))


def impute_connectivity(theta_mask: np.ndarray, psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Add few random edges to ``theta_mask`` so ``theta + psi`` has no empty row or column.

    Nodes lacking out-edges are first paired with nodes lacking in-edges (one
    new edge fixes both); the leftovers get one edge to or from a random node.
    """
    mask = np.asarray(theta_mask, dtype=bool).copy()
    n = mask.shape[0]
    if n < 2:
        return mask
    union = mask | (np.asarray(psi) > 0)
    no_out = list(rng.permutation(np.flatnonzero(~union.any(axis=1))))
    no_in = list(rng.permutation(np.flatnonzero(~union.any(axis=0))))
    leftover_out = []
    for j in no_out:
        pick = next((k for k in no_in if k != j), None)
        if pick is None:
            leftover_out.append(j)
            continue
        no_in.remove(pick)
        mask[j, pick] = True
    for j in leftover_out:
        others = np.delete(np.arange(n), j)
        mask[j, rng.choice(others)] = True
    for i in no_in:
        if mask[:, i].any():
            continue
        others = np.delete(np.arange(n), i)
        mask[rng.choice(others), i] = True
    return mask


def overlap(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """Jaccard index of two supports (0 when both are empty)."""
    a, b = np.asarray(mask_a) != 0, np.asarray(mask_b) != 0
    union = np.count_nonzero(a | b)
    return float(np.count_nonzero(a & b)) / union if union else 0.0


def gen_overlap_pair(spec: GenSpec, rng: np.random.Generator, tol: float = 0.05,
                     max_tries: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """``(theta, psi)`` whose supports have Jaccard overlap within ``tol`` of the target.

    Psi is drawn first. Theta gets as many edges as psi: ``k`` of them shared
    with psi's support and the rest outside it, where ``k`` solves
    ``k / (2|B| - k) = target``. Psi is redrawn when rounding or a lack of free
    cells keeps the realized overlap out of tolerance.
    """
    target = spec.target_overlap
    if target is None:
        raise ValidationError("spec.target_overlap is not set")
    n = spec.n
    off = _off_diagonal(n)
    for _ in range(max_tries):
        psi = gen_psi(spec, rng)
        b = (psi > 0) & off
        size = int(b.sum())
        if size == 0:
            continue
        k = int(round(2 * target * size / (1 + target)))
        inside = np.flatnonzero(b.ravel())
        outside = np.flatnonzero((~b & off).ravel())
        if size - k > outside.size:
            continue
        cells = np.concatenate([rng.choice(inside, k, replace=False),
                                rng.choice(outside, size - k, replace=False)])
        a = np.zeros(n * n, dtype=bool)
        a[cells] = True
        a = a.reshape(n, n)
        if abs(overlap(a, b) - target) <= tol:
            return weights_on(a, spec.weight_range, rng), psi
    raise GenerationFailure(f"could not reach overlap {target} within {tol} after {max_tries} tries")


def gen_params(spec: GenSpec, rng: np.random.Generator, pi_range: tuple[float, float] = (0.3, 0.7),
               impute: bool = True) -> tuple[np.ndarray, MixtureParams]:
    """Full ground truth: support mask and ``(theta, psi, pi)``.

    Imputed edges join the mask and get weights from ``spec.weight_range``.
    """
    if spec.target_overlap is not None:
        theta, psi = gen_overlap_pair(spec, rng)
        mask = theta > 0
    else:
        mask, theta = gen_theta(spec, rng)
        psi = gen_psi(spec, rng)
    if impute:
        full = impute_connectivity(mask, psi, rng)
        extra = full & ~mask
        theta = np.where(extra, weights_on(extra, spec.weight_range, rng), theta)
        mask = full
    pi = rng.uniform(pi_range[0], pi_range[1], size=spec.n)
    return mask, MixtureParams(theta, psi, pi)
