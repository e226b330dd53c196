import numpy as np
import pytest

from segfeat.autodiff import ParameterSet
from segfeat.optim import AdamState, adam_step, clip_grad_norm


def test_zero_gradients_leave_params_unchanged():
    params = ParameterSet()
    w = params.add("w", np.array([[1.0, -2.0]]))
    state = AdamState(params)
    before = w.value.copy()
    adam_step(params, state, lr=0.1)
    assert np.array_equal(w.value, before)
    assert state.step == 1
    assert np.all(state.m["w"] == 0.0)
    assert np.all(state.v["w"] == 0.0)


def test_first_step_magnitude_with_unit_gradient():
    params = ParameterSet()
    w = params.add("w", np.array([[0.0]]))
    state = AdamState(params)
    w.grad[:] = 1.0
    lr = 1e-3
    eps = 1e-8
    adam_step(params, state, lr=lr, eps=eps)
    # bias-corrected m-hat = v-hat = 1 at t=1, so the update is lr/(1+eps)
    assert w.value.item() == pytest.approx(-lr / (1.0 + eps), rel=1e-12)


def test_large_t_constant_gradient_is_scale_invariant():
    # iterate the recurrence: with a constant gradient the step magnitude
    # approaches lr regardless of the gradient scale
    def settled_update(g, steps=400, lr=0.01):
        params = ParameterSet()
        w = params.add("w", np.array([[0.0]]))
        state = AdamState(params)
        prev = 0.0
        for _ in range(steps):
            prev = w.value.item()
            w.grad[:] = g
            adam_step(params, state, lr=lr)
        return prev - w.value.item()

    small = settled_update(1.0)
    large = settled_update(100.0)
    assert small == pytest.approx(0.01, rel=1e-3)
    assert large == pytest.approx(0.01, rel=1e-3)
    assert small == pytest.approx(large, rel=1e-6)


def test_misaligned_state_rejected():
    params = ParameterSet()
    params.add("w", np.zeros(3))
    state = AdamState(params)
    other = ParameterSet()
    other.add("q", np.zeros(3))
    with pytest.raises(ValueError):
        adam_step(other, state, lr=0.1)


def test_adam_decreases_quadratic():
    params = ParameterSet()
    w = params.add("w", np.array([3.0, -2.0]))
    state = AdamState(params)
    for _ in range(2000):
        w.grad = 2.0 * w.value
        adam_step(params, state, lr=0.01)
    assert np.all(np.abs(w.value) < 0.05)


def test_clip_grad_norm():
    params = ParameterSet()
    a = params.add("a", np.zeros(3))
    b = params.add("b", np.zeros(4))
    a.grad[:] = 3.0
    b.grad[:] = 4.0
    norm = float(np.sqrt(3 * 9.0 + 4 * 16.0))
    got = clip_grad_norm(params, 5.0)
    assert got == pytest.approx(norm)
    assert params.grad_norm() == pytest.approx(5.0)
    # below the threshold nothing changes
    got2 = clip_grad_norm(params, 50.0)
    assert got2 == pytest.approx(5.0)
    assert params.grad_norm() == pytest.approx(5.0)
    # zero disables clipping
    a.grad[:] = 100.0
    clip_grad_norm(params, 0.0)
    assert np.all(a.grad == 100.0)
