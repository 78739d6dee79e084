"""Reverse-mode semantics: tape ordering, accumulation, backward rules."""

import numpy as np
import pytest

import edgeneck as en
from edgeneck.errors import ContractError, UsageError
from edgeneck.tensor import BACKWARD

from reference import conv2d_reference


def rng(seed=0):
    return np.random.default_rng(seed)


def leaf(dims, seed=0, dtype=np.float64):
    return en.Tensor(rng(seed).standard_normal(dims).astype(dtype), requires_grad=True)


def test_root_must_be_scalar():
    x = leaf((1, 2, 2, 2))
    with en.Tape() as tape:
        y = en.mul(x, x)
    with pytest.raises(ContractError):
        en.backward(tape, y)


def test_root_must_come_from_tape():
    x = leaf((1, 1, 2, 2))
    with en.Tape() as tape:
        en.sum_all(x)
    stray = en.sum_all(x)  # built outside the tape context
    with pytest.raises(UsageError):
        en.backward(tape, stray)


def test_no_recording_without_tape():
    x = leaf((1, 1, 2, 2))
    with en.Tape() as tape:
        pass
    en.sum_all(en.mul(x, x))
    assert len(tape) == 0


def test_constant_results_are_not_recorded():
    a = en.ones((1, 1, 2, 2))
    with en.Tape() as tape:
        en.mul(a, a)
    assert len(tape) == 0


def test_relu_grad_is_mask():
    x = en.Tensor(np.abs(rng(1).standard_normal((1, 2, 3, 3))) + 0.5, requires_grad=True)
    with en.Tape() as tape:
        loss = en.sum_all(en.relu(x))
    en.backward(tape, loss)
    assert np.array_equal(x.grad, np.ones_like(x.data))


def test_square_sum_grad_is_2x():
    x = leaf((1, 2, 3, 3), seed=2)
    with en.Tape() as tape:
        loss = en.sum_all(en.mul(x, x))
    en.backward(tape, loss)
    assert np.allclose(x.grad, 2 * x.data, atol=1e-12)


def test_self_add_doubles_gradient():
    x = leaf((1, 1, 2, 2), seed=3)
    with en.Tape() as tape:
        loss = en.sum_all(en.add(x, x))
    en.backward(tape, loss)
    assert np.array_equal(x.grad, np.full_like(x.data, 2.0))


def test_shared_operand_fanout_accumulates():
    # y feeds two consumers; its upstream leaf must see both paths
    x = leaf((1, 1, 2, 2), seed=4)
    c = en.Tensor(rng(5).standard_normal((1, 1, 2, 2)))
    with en.Tape() as tape:
        y = en.relu(x)
        loss = en.add(en.sum_all(en.mul(y, c)), en.sum_all(y))
    en.backward(tape, loss)
    want = (c.data + 1.0) * (x.data > 0)
    assert np.allclose(x.grad, want, atol=1e-12)


def test_grads_accumulate_until_zeroed():
    x = leaf((1, 1, 2, 2), seed=6)
    for expected in (1.0, 2.0):
        with en.Tape() as tape:
            loss = en.sum_all(x)
        en.backward(tape, loss)
        assert np.allclose(x.grad, expected)
    x.zero_grad()
    assert not x.grad.any()


def test_broadcast_add_reduces_gradient():
    a = leaf((2, 3, 4, 4), seed=7)
    b = leaf((1, 3, 1, 1), seed=8)
    with en.Tape() as tape:
        loss = en.sum_all(en.add(a, b))
    en.backward(tape, loss)
    assert np.allclose(a.grad, 1.0)
    assert np.allclose(b.grad, 2 * 4 * 4)


def test_max_pool_routes_to_first_maximum():
    x = en.Tensor(np.asarray([[[[1.0, 5.0], [5.0, 0.0]]]]), requires_grad=True)
    with en.Tape() as tape:
        loss = en.sum_all(en.global_pool("max", x))
    en.backward(tape, loss)
    assert np.array_equal(x.grad[0, 0], [[0.0, 1.0], [0.0, 0.0]])


def test_down2_max_ties_go_to_first_in_scan_order():
    x = en.Tensor(np.full((1, 1, 2, 2), 3.0), requires_grad=True)
    with en.Tape() as tape:
        loss = en.sum_all(en.resample(x, "down2_max"))
    en.backward(tape, loss)
    assert np.array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_conv_weight_grad_matches_finite_differences():
    r = rng(9)
    x = en.Tensor(r.standard_normal((1, 2, 5, 5)))
    w = en.Tensor(r.standard_normal((3, 2, 3, 3)), requires_grad=True)
    spec = en.ConvSpec(padding=(1, 1))
    with en.Tape() as tape:
        loss = en.sum_all(en.conv2d(x, w, spec=spec))
    en.backward(tape, loss)
    eps = 1e-3
    for idx in [(0, 0, 0, 0), (1, 1, 2, 1), (2, 0, 1, 2)]:
        wp, wm = w.data.copy(), w.data.copy()
        wp[idx] += eps
        wm[idx] -= eps
        fp = conv2d_reference(x.data, wp, padding=(1, 1)).sum()
        fm = conv2d_reference(x.data, wm, padding=(1, 1)).sum()
        numeric = (fp - fm) / (2 * eps)
        assert abs(w.grad[idx] - numeric) / max(1.0, abs(numeric)) < 1e-5


def test_sum_respects_downstream_only():
    # gradient must not flow through ops recorded after the root
    x = leaf((1, 1, 2, 2), seed=10)
    with en.Tape() as tape:
        loss = en.sum_all(x)
        en.sum_all(en.mul(x, x))  # consumer created after the root
    en.backward(tape, loss)
    assert np.allclose(x.grad, 1.0)


def test_backward_registry_is_patchable(monkeypatch):
    x = leaf((1, 1, 2, 2), seed=11)
    monkeypatch.setitem(BACKWARD, "relu", lambda rec, g: (np.zeros_like(g),))
    with en.Tape() as tape:
        loss = en.sum_all(en.relu(x))
    en.backward(tape, loss)
    assert not x.grad.any()
