import itertools

import numpy as np
import pytest

from tnet.errors import ConfigError, ShapeError, StateError
from tnet.gradsuite import check_model, check_module, _UNetWrap
from tnet.model import (
    LATERAL_OPTIONS, TRANSPOSE_OPTIONS, SegHead, TerraceConfig, TerraceStage, UNetDecoder, build,
    count_params, record_ops,
)
from tnet.model.layers import Conv2d
from tnet.nnops import ActivationKind, ConvSpec
from tnet.objective import total_loss
from tnet.tensor import Rng, float64_mode

DESK = TerraceConfig(num_classes=4)


def _image(shape, seed=0):
    return Rng(seed).uniform(-1, 1, int(np.prod(shape))).reshape(shape).astype(np.float32)


def _mask(shape, k, seed=1):
    n, _, h, w = shape
    return Rng(seed).integers(0, k, n * h * w).reshape(n, h, w)


def test_desk_shapes():
    model = build(DESK, seed=0)
    logits = model.forward(_image((1, 3, 64, 64)))
    assert [f.shape for f in model.features] == [(1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4), (1, 128, 2, 2)]
    stages = model.decoder.stages
    assert [s.last_shapes["F"] for s in stages] == [(1, 64, 4, 4), (1, 32, 8, 8), (1, 16, 16, 16)]
    assert all(s.last_shapes["T"] == s.last_shapes["C"] for s in stages)
    assert logits.shape == (1, 4, 64, 64)


def test_paper_preset_shapes():
    model = build(TerraceConfig.preset("paper", num_classes=6), seed=0).eval()
    model.forward(_image((2, 3, 512, 512)))
    assert model.features[-1].shape == (2, 512, 16, 16)
    t1 = model.decoder.stages[0].last_shapes["T"]
    assert t1[2:] == (32, 32) == model.features[2].shape[2:]


@pytest.mark.parametrize(
    "act,tk,lk", list(itertools.product(list(ActivationKind), TRANSPOSE_OPTIONS, LATERAL_OPTIONS))
)
def test_ablation_grid_shapes(act, tk, lk):
    cfg = TerraceConfig(stage_channels=(4, 8, 12, 16), num_classes=3, transpose_kernel=tk,
                        lateral_kernel=lk, activation=act)
    model = build(cfg, seed=0)
    logits = model.forward(_image((2, 3, 32, 64)))
    assert logits.shape == (2, 3, 32, 64) and np.isfinite(logits).all()


def test_unet_shapes():
    model = build(DESK.with_(decoder="unet"), seed=0)
    logits = model.forward(_image((1, 3, 64, 64)))
    stages = model.decoder.stages
    assert [s.last_shapes["F"] for s in stages] == [(1, 64, 4, 4), (1, 32, 8, 8), (1, 16, 16, 16)]
    assert stages[0].last_shapes["concat"][1] == 128 + 64
    assert logits.shape == (1, 4, 64, 64)


def test_unet_miniature_gradcheck():
    with float64_mode():
        dec = _UNetWrap(UNetDecoder((2, 3, 4), Rng(0)))
    rng = Rng(5)
    feats = [rng.uniform(-1, 1, int(np.prod(s))).reshape(s) for s in [(2, 2, 8, 8), (2, 3, 4, 4), (2, 4, 2, 2)]]
    rep = check_module(dec, feats, tol=1e-3)
    assert rep.passed, rep.lines()


def test_terrace_stage_gradcheck():
    with float64_mode():
        stage = TerraceStage(4, 3, 3, 4, 5, "relu6", Rng(0))
    rng = Rng(6)
    rep = check_module(stage, [rng.uniform(-1, 1, 32).reshape(2, 4, 2, 2), rng.uniform(-1, 1, 96).reshape(2, 3, 4, 4)])
    assert rep.passed, rep.lines()


def test_fusion_order_trace():
    model = build(DESK, seed=0)
    with record_ops() as trace:
        model.forward(_image((1, 3, 64, 64)))
    per_stage = {}
    for owner, op in trace:
        per_stage.setdefault(owner, []).append(op)
    assert list(per_stage) == ["stage1", "stage2", "stage3"]
    for ops in per_stage.values():
        assert ops == ["ConvT", "BN", "LateralConv", "BN", "Add", "Activation"]


def test_lateral_paths():
    assert TerraceStage(8, 4, 4, 3, None, "relu6", None).lateral_path == "identity"
    assert TerraceStage(8, 4, 6, 3, None, "relu6", None).lateral_path == "projection"
    assert TerraceStage(8, 4, 4, 3, 5, "relu6", None).lateral_path == "conv"


def test_stage_add_mismatch_names_stage():
    stage = TerraceStage(8, 4, 4, 3, 3, "relu6", Rng(0))
    stage.name = "stage2"
    with pytest.raises(ConfigError, match="stage2"):
        stage.forward(np.zeros((1, 8, 2, 2), np.float32), np.zeros((1, 4, 5, 5), np.float32))


def test_config_validation():
    with pytest.raises(ConfigError):
        TerraceConfig(stage_channels=(16, 16, 32, 64))
    with pytest.raises(ConfigError):
        TerraceConfig(num_classes=1)
    with pytest.raises(ConfigError):
        TerraceConfig(transpose_kernel=5)
    with pytest.raises(ConfigError):
        TerraceConfig(lateral_kernel=2)
    with pytest.raises(ConfigError):
        TerraceConfig(decoder="fpn")
    with pytest.raises(ConfigError):
        TerraceConfig.preset("huge")


def test_zero_network_logits_equal_head_bias():
    model = build(DESK, seed=None).eval()
    bias = np.array([0.5, -1.0, 2.0, 0.25], np.float32)
    model.head.classifier.bias.value[:] = bias
    logits = model.forward(_image((1, 3, 64, 64)))
    assert np.array_equal(logits, np.broadcast_to(bias[None, :, None, None], logits.shape))


def test_seg_head():
    head = SegHead(16, 6, Rng(0))
    x = _image((1, 16, 16, 16))
    y = head.forward(x)
    assert y.shape == (1, 6, 64, 64) and np.isfinite(y).all()
    zero = SegHead(16, 6, None).eval()
    zero.classifier.bias.value[:] = np.arange(6)
    y = zero.forward(x)
    assert np.array_equal(y[0, :, 10, 20], np.arange(6, dtype=np.float32))


def test_determinism():
    x = _image((2, 3, 64, 64))
    a = build(DESK, seed=7).forward(x)
    b = build(DESK, seed=7).forward(x)
    assert np.array_equal(a, b)
    m = build(DESK, seed=7)
    f1 = [f.copy() for f in (m.forward(x), *m.features)]
    f2 = [m.forward(x), *m.features]
    assert all(np.array_equal(p, q) for p, q in zip(f1, f2))


def test_indivisible_input():
    with pytest.raises(ShapeError):
        build(DESK, seed=None).forward(np.zeros((1, 3, 48, 64), np.float32))


def test_zero_loss_grad_gives_zero_grads():
    model = build(DESK, seed=0)
    logits = model.forward(_image((2, 3, 64, 64)))
    model.backward(np.zeros_like(logits))
    assert all(not p.grad.any() for p in model.registry.values())


def test_gradient_flow():
    model = build(DESK, seed=0)
    x = _image((2, 3, 64, 64))
    out = total_loss(model.forward(x), _mask(x.shape, 4))
    model.backward(out.grad_logits)
    dead = [k for k, p in model.registry.items() if not np.abs(p.grad).max() > 0]
    assert dead == []


def test_backward_twice_doubles():
    model = build(DESK, seed=0)
    x = _image((2, 3, 64, 64))
    g = Rng(3).normal(2 * 4 * 64 * 64).reshape(2, 4, 64, 64).astype(np.float32)
    model.forward(x)
    model.backward(g)
    first = {k: p.grad.copy() for k, p in model.registry.items()}
    # the activation cache is released by backward, so each backward needs its own forward
    model.forward(x)
    model.backward(g)
    assert all(np.array_equal(p.grad, 2 * first[k]) for k, p in model.registry.items())


def test_backward_requires_forward():
    model = build(DESK, seed=0)
    with pytest.raises(StateError):
        model.backward(np.zeros((1, 4, 64, 64), np.float32))
    model.forward(_image((1, 3, 64, 64)) * 0 + _image((1, 3, 64, 64)))
    model.backward(np.zeros((1, 4, 64, 64), np.float32))
    with pytest.raises(StateError):
        model.backward(np.zeros((1, 4, 64, 64), np.float32))
    model.eval().forward(_image((1, 3, 64, 64)))
    with pytest.raises(StateError):
        model.backward(np.zeros((1, 4, 64, 64), np.float32))


def test_full_model_finite_differences():
    rep = check_model(samples=20, seed=3)
    assert rep.passed, rep.lines()


def test_single_conv_params():
    conv = Conv2d(ConvSpec.same(16, 32, 3), None)
    assert sum(p.value.size for _, p in conv.named_params()) == 4608


def _resnet_encoder_params(c):
    """Per-layer hand count: 3x3 convs, 1x1 projection shortcuts, two BN params per channel."""
    total = 3 * c[0] * 49 + 2 * c[0]
    prev = c[0]
    for i, ch in enumerate(c):
        total += 9 * prev * ch + 9 * ch * ch + 4 * ch
        if i > 0:
            total += prev * ch + 2 * ch
        total += 2 * (9 * ch * ch) + 4 * ch
        prev = ch
    return total


def test_encoder_param_count():
    paper = TerraceConfig.preset("paper")
    n = count_params(paper, "encoder.")
    assert n == _resnet_encoder_params(paper.stage_channels)
    assert 10_000_000 <= n <= 13_000_000
    assert count_params(DESK, "encoder.") == _resnet_encoder_params(DESK.stage_channels)


def test_params_independent_of_batch():
    m = build(DESK, seed=0)
    before = m.registry.count()
    m.forward(_image((1, 3, 64, 64)))
    m.forward(_image((3, 3, 64, 64)))
    assert m.registry.count() == before == count_params(DESK)


def test_registry_paths():
    reg = build(DESK, seed=None).registry
    paths = list(reg)
    assert "encoder.stage1.block1.conv1.weight" in paths
    assert "decoder.terrace.stage1.transpose.weight" in paths
    assert "decoder.terrace.stage3.lateral.weight" in paths
    assert "decoder.terrace.stage2.bn_lateral.gamma" in paths
    assert len(set(paths)) == len(paths)
    assert all(p.grad.shape == p.value.shape for p in reg.values())
    assert list(build(DESK, seed=None).registry) == paths


def test_state_roundtrip_and_errors():
    a, b = build(DESK, seed=1), build(DESK, seed=2)
    b.load_arrays(a.state_arrays())
    x = _image((1, 3, 64, 64))
    assert np.array_equal(a.eval().forward(x), b.eval().forward(x))
    arrays = a.state_arrays()
    arrays.pop("head.classifier.bias")
    with pytest.raises(StateError, match="head.classifier.bias"):
        b.load_arrays(arrays)
