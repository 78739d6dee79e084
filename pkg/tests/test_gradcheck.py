"""The finite-difference checker itself: passes, failures, kink guard."""

import numpy as np
import pytest

import edgeneck as en
from edgeneck.errors import ContractError
from edgeneck.gradcheck import grad_check
from edgeneck.tensor import BACKWARD


def rng(seed=0):
    return np.random.default_rng(seed)


def test_conv_passes_at_default_tolerance():
    r = rng(1)
    spec = en.ConvSpec(padding=(1, 1))
    report = grad_check(
        lambda x, w: en.sum_all(en.conv2d(x, w, spec=spec)),
        {"x": r.standard_normal((1, 2, 5, 5)), "w": r.standard_normal((2, 2, 3, 3))},
    )
    assert report.ok
    assert report.max_rel_err < 1e-5
    assert report.skipped == 0


def test_sigmoid_chain_is_tight():
    r = rng(2)
    report = grad_check(
        lambda x: en.sum_all(en.sigmoid(en.mul(x, x))),
        {"x": r.standard_normal((1, 2, 3, 3))},
    )
    assert report.max_rel_err < 1e-6


def test_relu_with_probe_mask_passes():
    x = rng(3).standard_normal((1, 3, 4, 4))
    report = grad_check(
        lambda t: en.sum_all(en.relu(t)),
        {"x": x},
        probe_masks={"x": np.abs(x) > 0.1},
    )
    assert report.ok
    entry = report.entries[0]
    assert entry.probed == int((np.abs(x) > 0.1).sum())


def test_kink_straddling_probes_are_skipped():
    # every input sits within eps of the relu kink: nothing is probeable
    x = np.full((1, 1, 2, 2), 2e-4)
    report = grad_check(lambda t: en.sum_all(en.relu(t)), {"x": x}, eps=1e-3)
    entry = report.entries[0]
    assert entry.probed == 0
    assert entry.skipped == 4
    assert report.ok  # nothing measured, nothing failed


def test_pool_argmax_flip_is_guarded():
    # two near-tied elements: probing either straddles the argmax flip
    x = np.asarray([[[[1.0, 1.0 + 1e-4], [0.0, 0.0]]]])
    report = grad_check(lambda t: en.sum_all(en.global_pool("max", t)), {"x": x}, eps=1e-3)
    assert report.entries[0].skipped >= 2
    assert report.ok


def test_corrupted_backward_is_detected(monkeypatch):
    r = rng(4)
    monkeypatch.setitem(
        BACKWARD, "mul",
        lambda rec, g: (g * 1.5 * rec.inputs[1].data, g * rec.inputs[0].data))
    report = grad_check(
        lambda a, b: en.sum_all(en.mul(a, b)),
        {"a": r.standard_normal((1, 1, 2, 2)), "b": r.standard_normal((1, 1, 2, 2))},
    )
    assert not report.ok
    assert report.max_rel_err > 1e-2
    worst = max(report.entries, key=lambda e: e.max_rel_err)
    assert worst.label == "a"


def test_max_coords_caps_probe_count():
    report = grad_check(
        lambda x: en.sum_all(en.square(x)),
        {"x": rng(5).standard_normal((1, 4, 8, 8))},
        max_coords=5,
    )
    assert report.entries[0].probed == 5


def test_requires_scalar_target():
    with pytest.raises(ContractError):
        grad_check(lambda x: en.square(x), {"x": np.ones((1, 1, 2, 2))})


def test_mask_for_unknown_input_rejected():
    with pytest.raises(ContractError):
        grad_check(lambda x: en.sum_all(x), {"x": np.ones((1, 1, 2, 2))},
                   probe_masks={"y": np.ones((1, 1, 2, 2), bool)})


def test_report_format_lines():
    report = grad_check(
        lambda x: en.sum_all(en.square(x)),
        {"x": rng(6).standard_normal((1, 1, 2, 2))},
    )
    text = report.format()
    assert "x: probed=4" in text
    assert text.strip().endswith("[ok]")


def test_runs_in_float64_regardless_of_input_dtype():
    x32 = rng(7).standard_normal((1, 1, 3, 3)).astype(np.float32)
    report = grad_check(lambda x: en.sum_all(en.mul(x, x)), {"x": x32})
    assert report.max_rel_err < 1e-9
