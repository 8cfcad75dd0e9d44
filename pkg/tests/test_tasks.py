import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrarnn.numerics import make_rng
from lrarnn.tasks import (
    SYM_X,
    SYM_Y,
    Dataset,
    TaskKind,
    TaskSpec,
    gen_random_permutation,
    gen_temporal_order,
    gen_temporal_order_3bit,
)

GENERATORS = [
    (gen_temporal_order, 6, 4),
    (gen_temporal_order_3bit, 6, 8),
    (gen_random_permutation, 100, 2),
]


def class_freqs(ds):
    return np.bincount(ds.labels, minlength=ds.n_classes) / len(ds)


def test_temporal_order_shapes():
    ds = gen_temporal_order(10, 50, make_rng(0))
    for s in ds:
        assert s.inputs.shape == (10, 6)
        assert s.label < 4


def test_temporal_order_class_balance():
    ds = gen_temporal_order(20, 10_000, make_rng(1))
    assert np.all(np.abs(class_freqs(ds) - 0.25) < 0.02)


def test_temporal_order_3bit_labels_and_balance():
    ds = gen_temporal_order_3bit(10, 10_000, make_rng(2))
    assert set(np.unique(ds.labels)) == set(range(8))
    assert np.all(np.abs(class_freqs(ds) - 0.125) < 0.02)


def test_random_permutation_shapes_and_balance():
    ds = gen_random_permutation(10, 10_000, make_rng(3))
    assert ds[0].inputs.shape == (10, 100)
    assert set(np.unique(ds.labels)) <= {0, 1}
    assert np.all(np.abs(class_freqs(ds) - 0.5) < 0.015)
    assert np.all(ds.symbols[:, 0] == ds.labels)
    assert ds.symbols[:, 1:].min() >= 2 and ds.symbols[:, 1:].max() <= 99


@pytest.mark.parametrize("gen,n,k,chance", [
    (gen_temporal_order, 6, 4, 25.0),
    (gen_temporal_order_3bit, 6, 8, 12.5),
    (gen_random_permutation, 100, 2, 50.0),
])
def test_constant_classifier_scores_chance(gen, n, k, chance):
    train = gen(20, 10_000, make_rng(10))
    val = gen(20, 10_000, make_rng(11))
    majority = np.argmax(np.bincount(train.labels, minlength=k))
    acc = 100.0 * np.mean(val.labels == majority)
    assert abs(acc - chance) < 2.0


@pytest.mark.parametrize("gen", [gen_temporal_order, gen_temporal_order_3bit])
def test_short_sequences_rejected(gen):
    with pytest.raises(ValueError):
        gen(9, 1, make_rng(0))


def test_random_permutation_minimum_length():
    with pytest.raises(ValueError):
        gen_random_permutation(1, 1, make_rng(0))
    assert gen_random_permutation(2, 3, make_rng(0)).seq_len == 2


def test_temporal_order_informative_positions():
    T = 40
    ds = gen_temporal_order(T, 2000, make_rng(4))
    informative = ds.symbols >= SYM_X
    assert np.all(informative.sum(axis=1) == 2)
    first = np.argmax(informative, axis=1)
    last = T - 1 - np.argmax(informative[:, ::-1], axis=1)
    assert first.min() >= 4 and first.max() < 8
    assert last.min() >= 20 and last.max() < 24
    rows = np.arange(len(ds))
    bits = (ds.symbols[rows, first] == SYM_Y) * 2 + (ds.symbols[rows, last] == SYM_Y)
    np.testing.assert_array_equal(bits, ds.labels)


def test_3bit_label_encoding():
    ds = gen_temporal_order_3bit(30, 500, make_rng(5))
    for s in ds:
        pos = np.flatnonzero(s.symbols >= SYM_X)
        assert len(pos) == 3
        bits = [int(s.symbols[p] == SYM_Y) for p in pos]
        assert s.label == 4 * bits[0] + 2 * bits[1] + bits[2]


@given(st.integers(10, 400))
def test_windows_never_overlap(T):
    w = [((lo * T) // 10, (hi * T) // 10) for lo, hi in [(1, 2), (3, 4), (5, 6), (6, 7)]]
    for a, b in w:
        assert a < b
    for (a1, b1), (a2, b2) in zip(w, w[1:]):
        assert b1 <= a2


@given(st.sampled_from(list(TaskKind)), st.integers(10, 60), st.integers(0, 2**32))
def test_sample_invariants(kind, T, seed):
    task = TaskSpec(kind, T)
    ds = task.generate(1000 // T + 5, make_rng(seed))
    x = ds.one_hot()
    assert x.shape == (len(ds), T, task.input_dim)
    np.testing.assert_array_equal(x.sum(axis=2), 1.0)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert ds.labels.max() < task.num_classes


@given(st.sampled_from(list(TaskKind)), st.integers(0, 2**32))
def test_generation_is_deterministic(kind, seed):
    task = TaskSpec(kind, 20)
    a, b = task.generate(30, make_rng(seed)), task.generate(30, make_rng(seed))
    np.testing.assert_array_equal(a.symbols, b.symbols)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_dump_round_trip(tmp_path):
    ds = TaskSpec("temporal-order", 12).generate(25, make_rng(9))
    path = tmp_path / "d.txt"
    ds.save(path)
    first = path.read_text().splitlines()[0].split()
    assert len(first) == 13 and int(first[0]) == ds.labels[0]
    back = Dataset.load(path, 6, 4)
    np.testing.assert_array_equal(back.symbols, ds.symbols)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_task_spec_dims():
    assert (TaskSpec("temporal-order", 10).input_dim, TaskSpec("temporal-order", 10).num_classes) == (6, 4)
    assert TaskSpec("temporal-order-3bit", 10).num_classes == 8
    assert TaskSpec("random-permutation", 10).input_dim == 100
    with pytest.raises(ValueError):
        TaskSpec("temporal-order", 5)
