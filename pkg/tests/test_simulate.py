import math

import numpy as np
import pytest

from cascademix.errors import ValidationError
from cascademix.hazard import HazardModel
from cascademix.mixture import MixtureParams
from cascademix.simulate import (FixedSource, SimSpec, UniformSources, WeightedSources, cascade_streams, propagate,
                                 simulate_batch, simulate_cascade)


def single(net, pi=None):
    n = net.shape[0]
    return MixtureParams(net, net, np.ones(n) if pi is None else pi)


def test_zero_network_only_the_source_fires():
    cs, _ = simulate_batch(SimSpec(single(np.zeros((4, 4))), window=3.0, n_cascades=20, seed=1))
    assert np.all(cs.n_activated() == 1)
    assert np.all((cs.times == 0) | (cs.times == 3.0))


@pytest.mark.parametrize("model", [HazardModel.exp(), HazardModel.ray()], ids=lambda m: m.kind)
def test_chain_activation_probability(model):
    rate, window, n = 0.3, 2.0, 10_000
    net = np.array([[0.0, rate], [0.0, 0.0]])
    cs, _ = simulate_batch(SimSpec(single(net), model, window, n, FixedSource(0), seed=2))
    g = window if model.kind == "exp" else window**2 / 2
    p = 1 - math.exp(-rate * g)
    emp = np.mean(cs.times[:, 1] < window)
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_fan_children_are_independent():
    net = np.zeros((3, 3))
    net[0, 1] = net[0, 2] = 1.0
    cs, _ = simulate_batch(SimSpec(single(net), window=50.0, n_cascades=10_000, source=FixedSource(0), seed=3))
    r = np.corrcoef(cs.times[:, 1], cs.times[:, 2])[0, 1]
    assert abs(r) < 3 / math.sqrt(10_000)


def test_first_parent_rule():
    # 0 -> 1 is fast, 0 -> 2 -> 1 can only be slower
    net = np.zeros((3, 3))
    net[0, 1], net[0, 2], net[2, 1] = 5.0, 5.0, 5.0
    rng = np.random.default_rng(4)
    for _ in range(200):
        t = propagate(net, 0, HazardModel.exp(), 10.0, rng)
        assert t[0] == 0.0
        assert np.all(t <= 10.0)


def test_batch_shapes_and_edge_cases():
    p = single(np.ones((3, 3)) - np.eye(3))
    cs, z = simulate_batch(SimSpec(p, n_cascades=0))
    assert cs.times.shape == (0, 3) and z.shape == (0, 3)
    _, z = simulate_batch(SimSpec(p, n_cascades=30, seed=5))
    assert z.all()


def test_indicator_frequencies():
    net = np.ones((5, 5)) - np.eye(5)
    params = MixtureParams(net, 2 * net, np.full(5, 0.3))
    c = 4000
    _, z = simulate_batch(SimSpec(params, n_cascades=c, seed=6))
    sd = math.sqrt(0.3 * 0.7 / c)
    assert np.all(np.abs(z.mean(axis=0) - 0.3) <= 3.5 * sd)


def test_reproducible_per_cascade():
    net = np.ones((6, 6)) - np.eye(6)
    spec = SimSpec(MixtureParams(net, 0.5 * net, np.full(6, 0.5)), n_cascades=8, seed=7)
    a, za = simulate_batch(spec)
    b, zb = simulate_batch(spec)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(za, zb)
    # cascade k is reproducible from its own stream
    cascade, z = simulate_cascade(spec, cascade_streams(7, 8)[5])
    np.testing.assert_array_equal(cascade.times, a.times[5])
    np.testing.assert_array_equal(z, za[5])


def test_source_distributions():
    net = np.zeros((4, 4))
    p = single(net)
    cs, _ = simulate_batch(SimSpec(p, n_cascades=50, source=FixedSource(2), seed=8))
    assert np.all(cs.times[:, 2] == 0)
    cs, _ = simulate_batch(SimSpec(p, n_cascades=50, source=WeightedSources([0, 0, 0, 1.0]), seed=8))
    assert np.all(cs.times[:, 3] == 0)
    cs, _ = simulate_batch(SimSpec(p, n_cascades=400, source=UniformSources(), seed=8))
    counts = np.sum(cs.times == 0, axis=0)
    assert counts.min() > 60


def test_spec_validation():
    p = single(np.zeros((3, 3)))
    for bad in (dict(window=0.0), dict(window=math.inf), dict(n_cascades=-1), dict(source=FixedSource(3)),
                dict(source=WeightedSources(np.array([0.5, 0.5])))):
        with pytest.raises(ValidationError):
            SimSpec(p, **bad)
    with pytest.raises(ValidationError):
        WeightedSources(np.array([0.5, 0.6]))
