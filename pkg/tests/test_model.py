import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrarnn.model import (
    LocalLossKind,
    RnnParams,
    accuracy,
    forward,
    global_loss,
    local_loss,
    local_loss_grad,
    output_delta,
    predict,
)
from lrarnn.numerics import make_rng, softmax
from lrarnn.tasks import Dataset, TaskSpec

from oracles import central_diff, rel_error


def random_params(n, m, k, seed, scale=0.5):
    g = np.random.default_rng(seed)
    return RnnParams(
        W_xh=scale * g.standard_normal((n, m)),
        W_hh=scale * g.standard_normal((m, m)),
        W_hy=scale * g.standard_normal((m, k)),
        b_h=scale * g.standard_normal(m),
        b_y=scale * g.standard_normal(k),
    )


def test_zero_network_is_uniform():
    p = RnnParams.zeros(6, 5, 4)
    x = TaskSpec("temporal-order", 10).generate(3, make_rng(0)).one_hot()
    tr = forward(p, x)
    assert np.all(tr.h == 0) and np.all(tr.z == 0)
    np.testing.assert_allclose(tr.y_hat, 0.25)


def test_scalar_recurrence():
    p = RnnParams(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]),
                  np.array([0.0]), np.array([0.0]))
    tr = forward(p, np.ones((1, 2, 1)))
    z0 = math.tanh(1.0)
    h1 = z0 + 1.0
    z1 = math.tanh(h1)
    assert tr.t_max == 1
    assert tr.z[0, 0, 0] == pytest.approx(z0, abs=1e-15)
    assert tr.h[0, 1, 0] == pytest.approx(h1, abs=1e-15)
    assert tr.z[0, 1, 0] == pytest.approx(z1, abs=1e-15)
    assert (round(z0, 6), round(h1, 6), round(z1, 6)) == (0.761594, 1.761594, 0.942681)


@given(st.integers(0, 2**32), st.integers(1, 12))
def test_forward_trace_invariants(seed, T):
    p = random_params(3, 4, 3, seed, scale=2.0)
    g = np.random.default_rng(seed)
    x = np.eye(3)[g.integers(0, 3, size=(5, T))]
    tr = forward(p, x)
    np.testing.assert_array_equal(tr.z, np.tanh(tr.h))
    assert np.all(np.abs(tr.z) < 1)
    np.testing.assert_allclose(tr.y_hat.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((tr.y_hat >= 0) & (tr.y_hat <= 1))
    again = forward(p, x)
    np.testing.assert_array_equal(again.y_hat, tr.y_hat)


def test_forward_rejects_bad_shape():
    p = RnnParams.zeros(6, 5, 4)
    with pytest.raises(ValueError):
        forward(p, np.zeros((1, 10, 5)))


def test_params_shape_validation():
    with pytest.raises(ValueError):
        RnnParams(np.zeros((3, 4)), np.zeros((4, 5)), np.zeros((4, 2)), np.zeros(4), np.zeros(2))


@given(st.floats(-50, 50), st.integers(0, 2**32))
def test_softmax_shift_invariance(c, seed):
    logits = np.random.default_rng(seed).standard_normal((3, 5)) * 5
    assert np.max(np.abs(softmax(logits) - softmax(logits + c))) < 1e-12


def test_global_loss_values():
    assert global_loss(np.full(4, 0.25), 2) == pytest.approx(math.log(4), abs=1e-12)
    assert round(float(global_loss(np.full(4, 0.25), 0)), 6) == 1.386294
    assert global_loss(np.array([0.0, 1.0, 0.0]), 1) == 0.0
    assert global_loss(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))
    with pytest.raises(ValueError):
        global_loss(np.full(4, 0.25), 4)


def test_cross_entropy_logit_gradient_fd(rng):
    logits = rng.standard_normal((4, 5))
    labels = np.array([0, 3, 4, 1])
    analytic = output_delta(softmax(logits), labels)
    fd = central_diff(lambda lg: np.sum(global_loss(softmax(lg), labels)), logits)
    assert rel_error(analytic, fd) < 1e-8


@pytest.mark.parametrize("kind", list(LocalLossKind))
def test_local_loss_zero_at_target(kind, rng):
    z = rng.standard_normal(6)
    assert local_loss(z, z, kind) == 0.0
    np.testing.assert_array_equal(local_loss_grad(z, z, kind), 0.0)


def test_local_loss_values():
    z, zh = np.array([1.0, 1.0]), np.zeros(2)
    assert local_loss(z, zh, "mse") == 1.0
    assert local_loss(z, zh, "log-penalty") == pytest.approx(math.log(2), abs=1e-12)
    assert round(float(local_loss(z, zh, "log-penalty")), 6) == 0.693147


@pytest.mark.parametrize("kind", list(LocalLossKind))
def test_local_loss_grad_fd(kind):
    g = np.random.default_rng(99)
    eps = 1e-6
    for _ in range(10):
        z, zh = g.uniform(-1, 1, 5), g.uniform(-1, 1, 5)
        fd = central_diff(lambda v: local_loss(v, zh, kind), z, eps=1e-5)
        assert rel_error(local_loss_grad(z, zh, kind), fd) < 1e-8


def test_accuracy_zero_net_balanced_four_class():
    ds = TaskSpec("temporal-order", 10).generate(4000, make_rng(0))
    acc = accuracy(RnnParams.zeros(6, 5, 4), ds)
    assert abs(acc - 25.0) < 2.0
    # ties go to class 0
    np.testing.assert_array_equal(predict(RnnParams.zeros(6, 5, 4), ds.one_hot()[:10]), 0)
    assert acc == pytest.approx(100.0 * np.mean(ds.labels == 0))


def test_accuracy_single_correct_sample():
    p = RnnParams.zeros(6, 5, 4)
    p = RnnParams(p.W_xh, p.W_hh, p.W_hy, p.b_h, np.array([0.0, 0.0, 5.0, 0.0]))
    ds = Dataset(np.zeros((1, 10), dtype=int), np.array([2]), 6, 4)
    assert accuracy(p, ds) == 100.0


def test_untrained_orthogonal_net_random_permutation_chance():
    # a single random readout is biased either way because x_0 survives in
    # the final state; chance level holds on average over initialisations
    val = TaskSpec("random-permutation", 10).generate(10_000, make_rng(1))
    accs = [accuracy(RnnParams.init(100, 50, 2, make_rng(s)), val) for s in range(60)]
    assert abs(np.mean(accs) - 50.0) < 2.0
