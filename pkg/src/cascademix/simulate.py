"""Event-driven cascade sampler under the two-layer mixture.

Per cascade: draw the layer indicators ``z``, assemble the mixed network
(column ``i`` from theta when ``z[i]``), pick a source, then propagate with a
Dijkstra-style priority queue. When a node activates it proposes a delay to
each of its children; a child activates at the earliest proposal. Anything
past the window is censored to exactly ``T``.

Every cascade owns an independent random stream spawned from the master seed,
so cascade ``c`` is reproducible on its own and batches can be split freely.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ValidationError
from .hazard import HazardModel, sample_delays
from .likelihood import Cascade, CascadeSet
from .mixture import MixtureParams, mixed_network


@dataclass(frozen=True)
class UniformSources:
    """Source drawn uniformly from all nodes."""


@dataclass(frozen=True)
class FixedSource:
    node: int


@dataclass(frozen=True)
class WeightedSources:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-9):
            raise ValidationError("source weights must be a nonnegative vector summing to 1")
        object.__setattr__(self, "weights", w)


SourceDist = Union[UniformSources, FixedSource, WeightedSources]


@dataclass(frozen=True)
class SimSpec:
    params: MixtureParams
    model: HazardModel = field(default_factory=HazardModel)
    window: float = 10.0
    n_cascades: int = 1
    source: SourceDist = field(default_factory=UniformSources)
    seed: int = 0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.window) and self.window > 0):
            raise ValidationError("window must be finite and positive")
        if self.n_cascades < 0:
            raise ValidationError("n_cascades must be nonnegative")
        n = self.params.n_nodes
        if isinstance(self.source, FixedSource) and not 0 <= self.source.node < n:
            raise ValidationError("fixed source is not a node")
        if isinstance(self.source, WeightedSources) and self.source.weights.shape != (n,):
            raise ValidationError("source weights must have one entry per node")


def _draw_source(dist: SourceDist, n: int, rng: np.random.Generator) -> int:
    if isinstance(dist, FixedSource):
        return dist.node
    if isinstance(dist, WeightedSources):
        return int(rng.choice(n, p=dist.weights))
    return int(rng.integers(n))


def propagate(net: np.ndarray, source: int, model: HazardModel, window: float,
              rng: np.random.Generator) -> np.ndarray:
    """First-parent propagation over a fixed network; returns times with censoring at ``window``.

    Popping is ordered by ``(time, node)``, so ties resolve toward the smaller
    index. Delays for all ``N`` cells of a row are drawn when its node
    activates (absent edges give ``inf``), which keeps stream use independent
    of the rates.
    """
    n = net.shape[0]
    best = np.full(n, np.inf)
    best[source] = 0.0
    done = np.zeros(n, dtype=bool)
    queue = [(0.0, source)]
    while queue:
        t, j = heapq.heappop(queue)
        if done[j] or t > best[j]:
            continue
        if t >= window:
            break
        done[j] = True
        proposal = t + sample_delays(model, net[j], rng)
        better = (proposal < best) & ~done
        for i in np.flatnonzero(better):
            best[i] = proposal[i]
            heapq.heappush(queue, (float(proposal[i]), int(i)))
    return np.where(best < window, best, window)


def simulate_cascade(spec: SimSpec, rng: np.random.Generator) -> tuple[Cascade, np.ndarray]:
    """One cascade and its indicator vector (``True`` = column taken from theta).

    Indicators are drawn for every node, activated or not.
    """
    params = spec.params
    n = params.n_nodes
    z = rng.random(n) < params.pi
    source = _draw_source(spec.source, n, rng)
    times = propagate(mixed_network(params, z), source, spec.model, spec.window, rng)
    return Cascade(times, spec.window), z


def cascade_streams(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-cascade generators spawned from one master seed."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def simulate_batch(spec: SimSpec) -> tuple[CascadeSet, np.ndarray]:
    """``n_cascades`` i.i.d. cascades ``(C, N)`` and their indicator matrix, deterministic in ``spec.seed``."""
    n, c = spec.params.n_nodes, spec.n_cascades
    times = np.empty((c, n))
    z = np.empty((c, n), dtype=bool)
    for k, rng in enumerate(cascade_streams(spec.seed, c)):
        cascade, z[k] = simulate_cascade(spec, rng)
        times[k] = cascade.times
    return CascadeSet(times, spec.window), z
