"""
LSNet: lightweight spectrogram network.

    stem1 (1 -> 16, /2) -> stem2 (16 -> 16, /2)
    -> stage1 (3 MCAC @ 16) -> down (16 -> 32, /2)
    -> stage2 (4 MCAC @ 32) -> down (32 -> 64, /2)
    -> stage3 (6 MCAC @ 64)
    -> global average pool -> 1x1 conv 64 -> 128 -> GELU -> linear 128 -> K
"""

import math
from collections import OrderedDict

import torch
from torch import nn

from dronerf.src.errors import ModelShapeError, NonFiniteError
from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.lsnet.mcac_block import DropPath, MCACBlock
from dronerf.src.modeling.lsnet.stem import Stem


class Head(nn.Module):
    """Pool, project to the head width, activate, classify."""

    def __init__(self, in_channels, width, num_classes):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.projection = nn.Conv2d(in_channels, width, kernel_size=1)
        self.act = nn.GELU()
        self.fc = nn.Linear(width, num_classes)

    def embed(self, x):
        return self.act(self.projection(self.pool(x))).flatten(1)

    def forward(self, x):
        return self.fc(self.embed(x))


class LSNet(nn.Module):

    def __init__(self, config):
        super().__init__()
        self.config = config.validate()
        self.check_finite = True

        channels = config.stage_channels
        rates = torch.linspace(0.0, config.droppath_max, config.total_blocks).tolist()

        layers = OrderedDict()
        layers["stem1"] = Stem(config.input_channels, channels[0])
        layers["stem2"] = Stem(channels[0], channels[0])

        block_index = 0
        for stage, (width, depth, size) in enumerate(
                zip(channels, config.stage_depths, config.stage_sizes), start=1):
            if stage > 1:
                layers[f"downsample{stage}"] = nn.Sequential(
                    nn.Conv2d(channels[stage - 2], width, kernel_size=3, stride=2, padding=1),
                    nn.BatchNorm2d(width),
                )
            blocks = []
            for _ in range(depth):
                blocks.append(MCACBlock(
                    width, size,
                    expansion=config.expansion,
                    drop_path=rates[block_index],
                    channel_mix=config.mca_channel_mix,
                ))
                block_index += 1
            layers[f"stage{stage}"] = nn.Sequential(*blocks)

        self.layers = nn.ModuleDict(layers)
        self.head = Head(channels[-1], config.head_width, config.num_classes)

    def _check_input(self, x):
        c = self.config
        expected = (c.input_channels, c.input_size, c.input_size)
        if x.dim() != 4 or tuple(x.shape[1:]) != expected:
            raise ModelShapeError(f"LSNet expects (N, {expected[0]}, {expected[1]}, {expected[2]}), "
                                  f"got {tuple(x.shape)}")

    def _guard(self, name, x):
        if self.check_finite and not torch.isfinite(x).all():
            raise NonFiniteError(f"non-finite activation after {name}", where=name)
        return x

    def features(self, x):
        """Pooled, projected head embedding (N, head_width)."""
        self._check_input(x)
        for name, layer in self.layers.items():
            x = self._guard(name, layer(x))
        return self._guard("projection", self.head.embed(x))

    def forward(self, x):
        return self._guard("fc", self.head.fc(self.features(x)))

    def trace_shapes(self, x):
        """Per-layer output shapes (without the batch dimension), computed in eval mode."""
        self._check_input(x)
        was_training = self.training
        self.eval()
        shapes = OrderedDict()
        try:
            with torch.no_grad():
                for name, layer in self.layers.items():
                    x = layer(x)
                    shapes[name] = tuple(x.shape[1:])
                pooled = self.head.pool(x)
                shapes["pool"] = tuple(pooled.shape[1:])
                embedding = self.head.act(self.head.projection(pooled)).flatten(1)
                shapes["projection"] = tuple(embedding.shape[1:])
                shapes["fc"] = tuple(self.head.fc(embedding).shape[1:])
        finally:
            self.train(was_training)
        return shapes

    def drop_paths(self):
        return [m for m in self.modules() if isinstance(m, DropPath)]

    def set_drop_path_generator(self, generator):
        """Install (or clear with None) the generator used by every drop-path."""
        for module in self.drop_paths():
            module.generator = generator


def initialize_weights(model, seed):
    """
    Deterministic initialization under a forked torch RNG.

    Convolutions and linear layers: truncated normal with std sqrt(2 / fan_in),
    biases zero; normalization scale one and shift zero; the last 1x1 conv of
    every MCAC block zero so blocks start as the identity.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed) % (2 ** 63))
        for module in model.modules():
            if isinstance(module, (nn.Conv2d, nn.Linear)):
                fan_in = module.weight[0].numel()
                std = math.sqrt(2.0 / fan_in)
                nn.init.trunc_normal_(module.weight, mean=0.0, std=std, a=-2 * std, b=2 * std)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, (nn.BatchNorm2d, nn.GroupNorm)):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)
        for module in model.modules():
            if isinstance(module, MCACBlock):
                nn.init.zeros_(module.project.weight)
                nn.init.zeros_(module.project.bias)
    return model


def build_lsnet(config=None, seed=0):
    """
    Build and initialize an LSNet.

    Args:
        config (LSNetConfig or dict): architecture (default: 7 classes)
        seed (int): initialization seed

    Returns:
        LSNet: in train mode, with build_seed recorded

    Raises:
        ConfigurationError: invalid config
    """
    config = LSNetConfig.from_dict(config or {})
    model = LSNet(config)
    initialize_weights(model, seed)
    model.build_seed = int(seed)
    return model


def forward(model, batch):
    """
    Logits for a batch.

    Raises:
        ModelShapeError: batch shape does not match the model config
        NonFiniteError: a layer produced NaN/Inf (where names the layer)
    """
    return model(batch)


def param_count(model):
    """Number of trainable scalars."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def mac_count(model):
    """
    Multiply-accumulates of one forward pass on a single input.

    Counts convolutions and linear layers from their output shapes:
    conv = out_elements * (in_channels / groups) * kh * kw, linear = in * out.
    """
    config = model.config
    total = 0

    def conv_hook(module, _inputs, output):
        nonlocal total
        kh, kw = module.kernel_size
        total += output.numel() * (module.in_channels // module.groups) * kh * kw

    def linear_hook(module, _inputs, output):
        nonlocal total
        total += output.shape[0] * module.in_features * module.out_features

    hooks = []
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            hooks.append(module.register_forward_hook(conv_hook))
        elif isinstance(module, nn.Linear):
            hooks.append(module.register_forward_hook(linear_hook))

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            dummy = torch.zeros(1, config.input_channels, config.input_size, config.input_size)
            model(dummy)
    finally:
        for hook in hooks:
            hook.remove()
        model.train(was_training)
    return int(total)


def storage_bytes(model):
    """Bytes of parameters and buffers at 32-bit precision."""
    return 4 * (sum(p.numel() for p in model.parameters()) + sum(b.numel() for b in model.buffers()))


if __name__ == "__main__":
    model = build_lsnet(LSNetConfig(), seed=0)
    print("LSNet summary:")
    print("-" * 70)
    for name, shape in model.trace_shapes(torch.zeros(1, 1, 128, 128)).items():
        print(f"  {name:<12} {shape}")
    print(f"Parameters: {param_count(model):,}")
    print(f"MACs: {mac_count(model) / 1e6:.1f} M")
    print(f"Storage: {storage_bytes(model) / 1e6:.2f} MB")
