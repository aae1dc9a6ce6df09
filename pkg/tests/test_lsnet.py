"""Tests for the LSNet architecture and checkpoint container."""

import numpy as np
import pytest
import torch

from dronerf.src.errors import ConfigurationError, ModelShapeError, NonFiniteError, ValidationError
from dronerf.src.modeling.lsnet.attention import AxisGate, MultiChannelAttention, mca_forward
from dronerf.src.modeling.lsnet.checkpoint import (
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.lsnet.mcac_block import MCACBlock, mcac_forward
from dronerf.src.modeling.lsnet.network import (
    build_lsnet,
    forward,
    mac_count,
    param_count,
    storage_bytes,
)
from dronerf.src.modeling.lsnet.stem import Stem, stem_forward


def test_shape_chain_matches_architecture_table(default_model):
    shapes = default_model.trace_shapes(torch.zeros(2, 1, 128, 128))
    assert shapes["stem1"] == (16, 64, 64)
    assert shapes["stem2"] == (16, 32, 32)
    assert shapes["stage1"] == (16, 32, 32)
    assert shapes["downsample2"] == (32, 16, 16)
    assert shapes["stage2"] == (32, 16, 16)
    assert shapes["downsample3"] == (64, 8, 8)
    assert shapes["stage3"] == (64, 8, 8)
    assert shapes["pool"] == (64, 1, 1)
    assert shapes["projection"] == (128,)
    assert shapes["fc"] == (7,)


def test_parameter_count_in_band(default_model):
    count = param_count(default_model)
    assert count == 358_625
    assert 340_000 <= count <= 376_000


def test_literal_attention_projection_is_60k_smaller():
    literal = build_lsnet(LSNetConfig(mca_channel_mix=False), seed=0)
    assert param_count(literal) == 358_625 - 60_000


def test_axis_gate_without_channel_mix_is_conv_bn_sigmoid():
    torch.manual_seed(0)
    gate = AxisGate(size=16, channels=8, channel_mix=False).eval()
    assert isinstance(gate.mix, torch.nn.Identity)
    pooled = torch.randn(3, 16, 1, 1)
    expected = torch.sigmoid(gate.norm(gate.proj(pooled)))
    assert torch.equal(gate(pooled), expected)
    assert gate(pooled).shape == (3, 8, 1, 1)

    extra = param_count(AxisGate(size=16, channels=8)) - param_count(gate)
    assert extra == 8 * 8 + 8


def test_head_sizes():
    assert sum(p.numel() for p in build_lsnet(LSNetConfig(), seed=0).head.fc.parameters()) == 903
    five = build_lsnet(LSNetConfig(num_classes=5), seed=0)
    assert sum(p.numel() for p in five.head.fc.parameters()) == 645
    five.eval()
    assert forward(five, torch.zeros(3, 1, 128, 128)).shape == (3, 5)


def test_cost_and_storage(default_model):
    macs = mac_count(default_model)
    assert 0.025e9 <= macs <= 0.1e9
    assert storage_bytes(default_model) < 2_000_000


def test_batch_of_64_and_zero_input(default_model):
    default_model.eval()
    with torch.no_grad():
        logits = forward(default_model, torch.zeros(64, 1, 128, 128))
    assert logits.shape == (64, 7)
    assert torch.isfinite(logits).all()
    assert torch.equal(logits[0], logits[63])


def test_eval_is_deterministic(default_model):
    default_model.eval()
    x = torch.randn(4, 1, 128, 128, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        assert torch.equal(default_model(x), default_model(x))


def test_same_seed_same_initialization():
    a, b = build_lsnet(LSNetConfig(), seed=3), build_lsnet(LSNetConfig(), seed=3)
    for (name, p), (_, q) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(p, q), name
    c = build_lsnet(LSNetConfig(), seed=4)
    assert not torch.equal(a.layers["stem1"].conv.weight, c.layers["stem1"].conv.weight)


def test_shape_errors(default_model):
    default_model.eval()
    with pytest.raises(ModelShapeError):
        default_model(torch.zeros(1, 1, 64, 64))
    with pytest.raises(ModelShapeError):
        default_model(torch.zeros(1, 2, 128, 128))


def test_non_finite_activation_names_layer(default_model):
    default_model.eval()
    x = torch.zeros(1, 1, 128, 128)
    x[0, 0, 5, 5] = float("nan")
    with pytest.raises(NonFiniteError) as info:
        default_model(x)
    assert info.value.where == "stem1"


def test_config_validation():
    with pytest.raises(ConfigurationError):
        LSNetConfig(num_classes=1).validate()
    with pytest.raises(ConfigurationError):
        LSNetConfig(droppath_max=1.0).validate()
    with pytest.raises(ConfigurationError):
        LSNetConfig(stage_depths=(3, 4)).validate()


# ----------------------------------------------------------------------------
# layers
# ----------------------------------------------------------------------------

def test_stem_shapes_and_constant_response():
    torch.manual_seed(0)
    stem1, stem2 = Stem(1, 16).eval(), Stem(16, 16).eval()
    with torch.no_grad():
        out1 = stem_forward(torch.zeros(1, 1, 128, 128), stem1)
        out2 = stem_forward(out1, stem2)
    assert out1.shape == (1, 16, 64, 64)
    assert out2.shape == (1, 16, 32, 32)
    interior = out1[0, :, 4:-4, 4:-4]
    assert torch.allclose(interior, interior[:, :1, :1].expand_as(interior), atol=1e-6)
    with pytest.raises(ModelShapeError):
        stem_forward(torch.zeros(1, 3, 128, 128), stem1)


def test_mca_preserves_shape_and_zero():
    torch.manual_seed(1)
    mca = MultiChannelAttention(16, 32)
    mca.eval()
    x = torch.randn(3, 16, 32, 32)
    with torch.no_grad():
        assert mca_forward(x, mca).shape == x.shape
        assert not mca_forward(torch.zeros(2, 16, 32, 32), mca).any()
        gates = mca.gates(x * 10)
    assert gates.min() >= 0 and gates.max() <= 3


def test_mca_rejects_non_square():
    mca = MultiChannelAttention(16, 32).eval()
    with pytest.raises(ModelShapeError):
        mca_forward(torch.zeros(1, 16, 32, 16), mca)
    with pytest.raises(ModelShapeError):
        mca_forward(torch.zeros(1, 16, 16, 16), mca)


def test_mcac_block_identity_cases():
    block = MCACBlock(16, 32, drop_path=0.0)
    torch.nn.init.normal_(block.project.weight, std=0.1)
    x = torch.randn(2, 16, 32, 32)
    assert torch.equal(mcac_forward(x, block, droppath_rate=1.0, mode="train"), x)
    assert block.drop_path.rate == 0.0

    fresh = build_lsnet(LSNetConfig(), seed=0).layers["stage1"][0]
    fresh.eval()
    with torch.no_grad():
        assert torch.equal(fresh(x), x)


def test_mcac_channel_trajectory():
    block = MCACBlock(16, 32)
    assert (block.expand.in_channels, block.expand.out_channels) == (16, 64)
    assert (block.project.in_channels, block.project.out_channels) == (64, 16)
    with pytest.raises(ModelShapeError):
        block(torch.zeros(2, 8, 32, 32))


def test_drop_path_uses_model_generator():
    model = build_lsnet(LSNetConfig(droppath_max=0.5), seed=0)
    for module in model.modules():
        if isinstance(module, MCACBlock):
            torch.nn.init.normal_(module.project.weight, std=0.05)
    model.train()
    x = torch.randn(4, 1, 128, 128, generator=torch.Generator().manual_seed(2))

    model.set_drop_path_generator(torch.Generator().manual_seed(9))
    first = model(x)
    model.set_drop_path_generator(torch.Generator().manual_seed(9))
    second = model(x)
    assert torch.equal(first, second)


def test_gradient_matches_finite_differences():
    model = build_lsnet(LSNetConfig(), seed=5).double()
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, MCACBlock):
                module.project.weight.normal_(0.0, 0.05, generator=torch.Generator().manual_seed(1))
    model.eval()
    model.check_finite = False
    x = torch.randn(1, 1, 128, 128, dtype=torch.float64, generator=torch.Generator().manual_seed(3))

    def loss_fn():
        return (model(x) ** 2).sum() * 0.5

    model.zero_grad()
    loss_fn().backward()

    rng = np.random.default_rng(0)
    named = [(n, p) for n, p in model.named_parameters()]
    checked = 0
    eps = 1e-6
    while checked < 20:
        name, param = named[int(rng.integers(len(named)))]
        index = tuple(int(rng.integers(s)) for s in param.shape)
        analytic = param.grad[index].item()
        with torch.no_grad():
            original = param[index].item()
            param[index] = original + eps
            plus = loss_fn().item()
            param[index] = original - eps
            minus = loss_fn().item()
            param[index] = original
        numeric = (plus - minus) / (2 * eps)
        scale = max(abs(analytic), abs(numeric))
        if scale < 1e-8:
            continue
        assert abs(analytic - numeric) / scale < 1e-3, name
        checked += 1


# ----------------------------------------------------------------------------
# checkpoint
# ----------------------------------------------------------------------------

def test_checkpoint_round_trip_is_bit_exact(tmp_path, default_model):
    default_model.train()
    default_model(torch.randn(2, 1, 128, 128))       # move running statistics
    size = save_checkpoint(default_model, tmp_path / "model.ckpt", extra={"round": 3})
    restored, header = load_checkpoint(tmp_path / "model.ckpt")

    assert size < 2_000_000
    assert header["extra"] == {"round": 3}
    assert header["seed"] == default_model.build_seed
    for (name, a), (_, b) in zip(default_model.state_dict().items(), restored.state_dict().items()):
        assert a.dtype == b.dtype, name
        assert torch.equal(a, b), name
    assert encode_checkpoint(restored) == encode_checkpoint(default_model)


def test_checkpoint_rejects_garbage():
    with pytest.raises(ValidationError):
        decode_checkpoint(b"not a checkpoint at all")
    with pytest.raises(ValidationError):
        decode_checkpoint(b"LSNETCKP" + (10_000).to_bytes(8, "little") + b"{}")
