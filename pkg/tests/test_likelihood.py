import math

import numpy as np
import pytest

from cascademix.errors import SourceNode, ValidationError
from cascademix.hazard import HazardModel
from cascademix.likelihood import (Cascade, CascadeBatch, CascadeSet, WeightedObjective, cascade_loglik,
                                   check_network, grad_column, log_p_activated, log_p_censored, node_loglik)

import oracles

MODELS = [HazardModel.exp(), HazardModel.pow(0.1), HazardModel.ray()]
ids = [m.kind for m in MODELS]
EXP = HazardModel.exp()


def random_net(rng, n, density=0.6, hi=2.0):
    net = np.where(rng.random((n, n)) < density, rng.uniform(0.1, hi, (n, n)), 0.0)
    np.fill_diagonal(net, 0.0)
    return net


# --- hand cases ------------------------------------------------------------------------------------


def test_single_parent():
    c = Cascade(np.array([0.0, 1.0]), 10.0)
    assert log_p_activated(np.array([1.0, 0.0]), c, 1, EXP) == -1.0


@pytest.mark.parametrize("a,b", [(0.5, 1.5), (2.0, 0.25)])
def test_two_parents_equal_lag(a, b):
    c = Cascade(np.array([0.0, 0.0, 1.0]), 10.0)
    got = log_p_activated(np.array([a, b, 0.0]), c, 2, EXP)
    assert got == pytest.approx(math.log(a + b) - a - b, abs=1e-15)


def test_censored_cases():
    c = Cascade(np.array([0.0, 5.0]), 5.0)
    assert log_p_censored(np.zeros(2), c, 1, EXP) == 0.0
    c = Cascade(np.array([2.0, 0.0, 5.0]), 5.0)
    assert log_p_censored(np.array([2.0, 0.0, 0.0]), c, 2, EXP) == -6.0


def test_source_has_no_term():
    c = Cascade(np.array([0.0, 1.0]), 10.0)
    with pytest.raises(SourceNode):
        log_p_activated(np.ones(2), c, 0, EXP)
    assert node_loglik(np.ones(2), c, 0, EXP) == 0.0


def test_empty_network_only_source():
    c = Cascade(np.array([0.0, 10.0, 10.0]), 10.0)
    assert cascade_loglik(np.zeros((3, 3)), c, EXP) == 0.0


def test_line_graph():
    net = np.zeros((3, 3))
    net[0, 1] = net[1, 2] = 1.0
    c = Cascade(np.array([0.0, 1.0, 2.0]), 10.0)
    assert cascade_loglik(net, c, EXP) == -2.0


def test_grad_column_hand_cases():
    c = Cascade(np.array([0.0, 1.0]), 10.0)
    g = grad_column(np.array([2.0, 0.0]), c, 1, EXP)
    assert g[0] == -0.5 and g[1] == 0.0
    # censored node: -(T - t_j) for each activated parent
    c = Cascade(np.array([0.0, 3.0, 10.0]), 10.0)
    g = grad_column(np.array([1.0, 1.0, 0.0]), c, 2, EXP)
    np.testing.assert_array_equal(g, [-10.0, -7.0, 0.0])


# --- brute-force agreement -----------------------------------------------------------------------


@pytest.mark.parametrize("model", MODELS, ids=ids)
def test_activated_matches_sum_of_products(model):
    rng = np.random.default_rng(0)
    for _ in range(30):
        t = np.concatenate([[0.0], rng.uniform(0.2, 3.0, 3)])
        col = rng.uniform(0.1, 2.0, 4)
        i = int(np.argmax(t))
        col[i] = 0.0
        ref = math.log(oracles.p_activated(model.kind, col, t, i, model.delta))
        assert log_p_activated(col, Cascade(t, 10.0), i, model) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=ids)
def test_censored_matches_direct_sum(model):
    rng = np.random.default_rng(1)
    for _ in range(30):
        t = oracles.random_times(rng, 5, 4.0)
        t[4] = 4.0
        col = rng.uniform(0.0, 2.0, 5)
        col[4] = 0.0
        ref = math.log(oracles.p_censored(model.kind, col, t, 4, 4.0, model.delta))
        assert log_p_censored(col, Cascade(t, 4.0), 4, model) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=ids)
def test_cascade_loglik_matches_brute_force(model):
    rng = np.random.default_rng(2)
    for _ in range(20):
        net = random_net(rng, 6)
        t = oracles.random_times(rng, 6, 5.0)
        ref = oracles.cascade_logprob(model.kind, net, t, 5.0, model.delta)
        got = cascade_loglik(net, Cascade(t, 5.0), model)
        if math.isinf(ref):
            assert got == ref
        else:
            assert got == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=ids)
def test_batch_matches_scalar_path(model):
    rng = np.random.default_rng(3)
    times = np.vstack([oracles.random_times(rng, 7, 3.0) for _ in range(15)])
    cs = CascadeSet(times, 3.0)
    net = random_net(rng, 7)
    batch = CascadeBatch(cs, model)
    per_node = batch.node_loglik(net)
    for c, cascade in enumerate(cs):
        for i in range(7):
            assert per_node[c, i] == pytest.approx(node_loglik(net[:, i], cascade, i, model), abs=1e-12)
    np.testing.assert_allclose(batch.loglik(net), [cascade_loglik(net, x, model) for x in cs], atol=1e-11)


@pytest.mark.parametrize("model", MODELS, ids=ids)
def test_grad_column_finite_differences(model):
    rng = np.random.default_rng(4)
    for _ in range(10):
        t = oracles.random_times(rng, 5, 4.0, p_active=0.8)
        cascade = Cascade(t, 4.0)
        col = rng.uniform(0.3, 2.0, 5)
        for i in range(1, 5):
            col_i = col.copy()
            col_i[i] = 0.0
            val = node_loglik(col_i, cascade, i, model)
            if not math.isfinite(val):
                continue
            g = grad_column(col_i, cascade, i, model)
            fd = oracles.central_difference(lambda x: node_loglik(x, cascade, i, model), col_i)
            fd[i] = 0.0
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_tied_sources_and_late_parents():
    # two nodes at time 0 are both sources; a tie at t_i gives no parent
    c = Cascade(np.array([0.0, 0.0, 1.0, 1.0]), 5.0)
    net = np.ones((4, 4)) - np.eye(4)
    assert node_loglik(net[:, 1], c, 1, EXP) == 0.0
    assert log_p_activated(net[:, 2], c, 2, EXP) == pytest.approx(math.log(2) - 2, abs=1e-15)


def test_concavity_along_segments():
    rng = np.random.default_rng(6)
    times = np.vstack([oracles.random_times(rng, 5, 3.0) for _ in range(10)])
    batch = CascadeBatch(CascadeSet(times, 3.0), EXP)
    obj = WeightedObjective(batch, rng.random((10, 5)))
    for _ in range(20):
        a, b = random_net(rng, 5, 1.0), random_net(rng, 5, 1.0)
        mid = obj.value((a + b) / 2)
        assert mid >= (obj.value(a) + obj.value(b)) / 2 - 1e-12


def test_objective_gradient_and_curvature():
    rng = np.random.default_rng(7)
    times = np.vstack([oracles.random_times(rng, 4, 3.0) for _ in range(8)])
    batch = CascadeBatch(CascadeSet(times, 3.0), HazardModel.ray())
    obj = WeightedObjective(batch, rng.random((8, 4)))
    net = random_net(rng, 4, 1.0)
    np.testing.assert_allclose(obj.gradient(net), oracles.central_difference(obj.value, net),
                               rtol=1e-5, atol=1e-7)
    # curvature is the negated Hessian diagonal
    h = 1e-4
    for j, i in [(0, 1), (2, 3), (3, 0)]:
        up, dn = net.copy(), net.copy()
        up[j, i] += h
        dn[j, i] -= h
        second = (obj.value(up) - 2 * obj.value(net) + obj.value(dn)) / h**2
        assert -second == pytest.approx(obj.curvature(net)[j, i], rel=1e-4, abs=1e-6)


def test_columns_are_separable():
    rng = np.random.default_rng(8)
    times = np.vstack([oracles.random_times(rng, 5, 3.0) for _ in range(6)])
    batch = CascadeBatch(CascadeSet(times, 3.0), EXP)
    obj = WeightedObjective(batch, np.ones((6, 5)))
    a = random_net(rng, 5, 1.0)
    b = a.copy()
    b[:, 2] = rng.uniform(0, 1, 5)
    b[2, 2] = 0.0
    diff = obj.column_values(a) != obj.column_values(b)
    assert not np.delete(diff, 2).any()


def test_validation():
    with pytest.raises(ValidationError):
        Cascade(np.array([0.0, 11.0]), 10.0)
    with pytest.raises(ValidationError):
        Cascade(np.array([1.0, 2.0]), 10.0)  # no source
    with pytest.raises(ValidationError):
        check_network(np.eye(2))
    with pytest.raises(ValidationError):
        check_network(-np.ones((2, 2)) + np.eye(2))
    with pytest.raises(ValidationError):
        CascadeSet.from_cascades([Cascade(np.zeros(2), 1.0), Cascade(np.zeros(2), 2.0)])


def test_empty_cascade_set():
    cs = CascadeSet(np.zeros((0, 3)), 5.0)
    assert len(cs) == 0 and cs.n_nodes == 3
    batch = CascadeBatch(cs, EXP)
    assert batch.n_events == 0 and batch.loglik(np.zeros((3, 3))).shape == (0,)
