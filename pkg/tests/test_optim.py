import numpy as np
import pytest

from utils.errors import ShapeMismatchError
from utils.optim import ParamStore, adam_step


def test_store_keeps_float32():
    store = ParamStore()
    store.add("w", np.ones((2, 3)))
    assert store["w"].dtype == np.float32
    assert store.num_values() == 6
    with pytest.raises(ValueError):
        store.add("w", np.ones(1))


def test_first_adam_step_is_lr_times_sign():
    store = ParamStore()
    store.add("p", np.zeros(2))
    adam_step(store, {"p": np.array([2.0, -3.0])}, lr=0.01)
    assert store.step_count == 1
    assert np.allclose(store["p"], [-0.01, 0.01], atol=1e-7)


def test_adam_converges_on_quadratic():
    target = np.array([0.5, -0.8, 0.2])
    store = ParamStore()
    store.add("p", np.zeros(3))
    for _ in range(2000):
        g = 2.0 * (store["p"].astype(np.float64) - target)
        adam_step(store, {"p": g}, lr=0.01)
    assert np.allclose(store["p"], target, atol=1e-2)
    assert store.step_count == 2000


def test_gradient_shape_mismatch():
    store = ParamStore()
    store.add("p", np.zeros(3))
    with pytest.raises(ShapeMismatchError):
        adam_step(store, {"p": np.zeros(4)}, lr=0.01)
    with pytest.raises(KeyError):
        adam_step(store, {"q": np.zeros(3)}, lr=0.01)


def test_set_validates_shape():
    store = ParamStore()
    store.add("p", np.zeros(3))
    store.set("p", [1.0, 2.0, 3.0])
    assert np.array_equal(store["p"], np.array([1, 2, 3], dtype=np.float32))
    with pytest.raises(ShapeMismatchError):
        store.set("p", np.zeros(2))


def test_copy_is_independent():
    store = ParamStore()
    store.add("p", np.zeros(2))
    clone = store.copy()
    adam_step(store, {"p": np.ones(2)}, lr=0.1)
    assert np.array_equal(clone["p"], np.zeros(2, dtype=np.float32))
    assert clone.step_count == 0
