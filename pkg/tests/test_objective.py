import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnet.errors import NumericError, ShapeError
from tnet.nnops.gradcheck import gradcheck
from tnet.objective import IGNORE, cross_entropy, dice_loss, softmax_channels, total_loss
from tnet.tensor import Rng


def _logits(seed, shape, scale=2.0):
    return Rng(seed).uniform(-scale, scale, int(np.prod(shape))).reshape(shape)


def _mask(seed, n, h, w, k):
    return Rng(seed).integers(0, k, n * h * w).reshape(n, h, w)


def test_softmax_goldens():
    assert np.allclose(softmax_channels(np.zeros((1, 4, 2, 2))), 0.25, atol=0, rtol=1e-15)
    p = softmax_channels(np.array([0.0, math.log(3)]).reshape(1, 2, 1, 1)).ravel()
    assert np.allclose(p, [0.25, 0.75], atol=1e-15)
    z = _logits(0, (2, 5, 3, 3))
    assert np.abs(softmax_channels(z + 100) - softmax_channels(z)).max() <= 1e-6
    assert np.abs(softmax_channels(z).sum(axis=1) - 1).max() <= 1e-6


def test_ce_uniform_is_log_k():
    ce, _ = cross_entropy(np.zeros((2, 6, 3, 3)), _mask(0, 2, 3, 3, 6))
    assert abs(ce - math.log(6)) <= 1e-6


def test_ce_two_pixel_golden():
    logits = np.array([[0.0, 0.0], [0.0, math.log(3)]]).T.reshape(1, 2, 1, 2)
    ce, _ = cross_entropy(logits, np.array([[[0, 1]]]))
    assert abs(ce - (math.log(2) + math.log(4 / 3)) / 2) <= 1e-12


def test_ce_saturation():
    mask = _mask(1, 1, 4, 4, 3)
    logits = np.zeros((1, 3, 4, 4))
    np.put_along_axis(logits, mask[:, None], 50.0, axis=1)
    ce, _ = cross_entropy(logits, mask)
    assert 0 <= ce <= 1e-6
    out = total_loss(logits, mask)
    assert np.abs(out.grad_logits).max() <= 1e-5


def test_ce_all_ignored():
    with pytest.raises(NumericError):
        cross_entropy(np.zeros((1, 2, 2, 2)), np.full((1, 2, 2), IGNORE))


def test_label_out_of_range():
    with pytest.raises(ShapeError):
        cross_entropy(np.zeros((1, 2, 1, 1)), np.array([[[2]]]))
    with pytest.raises(ShapeError):
        cross_entropy(np.zeros((1, 2, 2, 2)), np.zeros((1, 3, 2), int))


def test_ce_gradient():
    z = _logits(2, (2, 3, 3, 3))
    mask = _mask(3, 2, 3, 3, 3)
    mask[1, 2, 2] = IGNORE
    _, g = cross_entropy(z, mask)
    assert not g[1, :, 2, 2].any()
    rep = gradcheck(lambda: cross_entropy(z, mask)[0], {"z": z}, {"z": g}, tol=1e-4)
    assert rep.passed, rep.lines()


def test_dice_golden():
    probs = np.full((1, 2, 2, 2), 0.5)
    loss, _ = dice_loss(probs, np.zeros((1, 2, 2), int))
    # class 0: (2*2+1)/(2+4+1) = 5/7; class 1: (0+1)/(2+0+1) = 1/3
    assert loss == pytest.approx(10 / 21, abs=1e-15)


def test_dice_perfect_is_zero():
    mask = _mask(4, 2, 3, 3, 3)
    onehot = (mask[:, None] == np.arange(3)[None, :, None, None]).astype(float)
    loss, _ = dice_loss(onehot, mask)
    assert loss == 0.0


def test_dice_gradient():
    probs = softmax_channels(_logits(5, (2, 3, 3, 3)))
    mask = _mask(6, 2, 3, 3, 3)
    mask[0, 0, :] = IGNORE
    _, g = dice_loss(probs, mask)
    rep = gradcheck(lambda: dice_loss(probs, mask)[0], {"p": probs}, {"p": g}, tol=1e-4)
    assert rep.passed, rep.lines()


def test_dice_monotone_on_path():
    mask = _mask(7, 2, 4, 4, 3)
    onehot = (mask[:, None] == np.arange(3)[None, :, None, None]).astype(float)
    uniform = np.full_like(onehot, 1 / 3)
    losses = [dice_loss((1 - a) * uniform + a * onehot, mask)[0] for a in np.linspace(0, 1, 10)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert all(0 <= v < 1 for v in losses)


def test_total_loss_composed_gradient():
    z = _logits(8, (2, 4, 3, 3))
    mask = _mask(9, 2, 3, 3, 4)
    mask[0, 1, 1] = IGNORE
    out = total_loss(z, mask)
    assert out.total == out.ce + out.dice
    assert out.grad_logits.shape == z.shape
    rep = gradcheck(lambda: total_loss(z, mask).total, {"z": z}, {"z": out.grad_logits}, tol=1e-3)
    assert rep.passed, rep.lines()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ignored_pixels_are_inert(seed):
    rng = Rng(seed)
    z = rng.uniform(-3, 3, 2 * 3 * 4 * 4).reshape(2, 3, 4, 4)
    mask = rng.integers(0, 3, 32).reshape(2, 4, 4)
    ignored = rng.random(32).reshape(2, 4, 4) < 0.3
    ignored[0, 0, 0] = False
    mask[ignored] = IGNORE
    a = total_loss(z, mask)
    z2 = np.where(ignored[:, None], rng.uniform(-50, 50, z.size).reshape(z.shape), z)
    b = total_loss(z2, mask)
    assert a.ce == pytest.approx(b.ce, rel=1e-12) and a.dice == pytest.approx(b.dice, rel=1e-12)
    keep = ~ignored[:, None].repeat(3, axis=1)
    np.testing.assert_allclose(a.grad_logits[keep], b.grad_logits[keep], rtol=1e-10, atol=1e-15)
    assert not b.grad_logits[~keep].any()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 6))
def test_loss_ranges(seed, k):
    z = _logits(seed, (1, k, 3, 3), 10)
    mask = _mask(seed + 1, 1, 3, 3, k)
    out = total_loss(z, mask)
    assert out.ce >= 0 and 0 <= out.dice < 1
    assert np.isfinite(out.grad_logits).all()
