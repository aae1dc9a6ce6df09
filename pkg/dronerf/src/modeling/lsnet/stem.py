"""
Stem layers: a stride-2 3x3 convolution followed by two depthwise-separable
units, each unit normalized with group normalization and activated with GELU.
"""

from torch import nn

from dronerf.src.errors import ModelShapeError
from dronerf.src.modeling.lsnet.config import STEM_GROUPS


class DepthwiseSeparableUnit(nn.Module):
    """Depthwise 3x3 + pointwise 1x1, then GroupNorm and GELU."""

    def __init__(self, channels, groups=STEM_GROUPS):
        super().__init__()
        self.depthwise_conv = nn.Conv2d(channels, channels, kernel_size=3, stride=1, padding=1,
                                        groups=channels)
        self.pointwise_conv = nn.Conv2d(channels, channels, kernel_size=1)
        self.norm = nn.GroupNorm(groups, channels)
        self.act = nn.GELU()

    def forward(self, x):
        return self.act(self.norm(self.pointwise_conv(self.depthwise_conv(x))))


class Stem(nn.Module):
    """Halves the spatial size: in_channels x H x W -> out_channels x H/2 x W/2."""

    def __init__(self, in_channels, out_channels, groups=STEM_GROUPS):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1)
        self.units = nn.Sequential(
            DepthwiseSeparableUnit(out_channels, groups),
            DepthwiseSeparableUnit(out_channels, groups),
        )

    def forward(self, x):
        return self.units(self.conv(x))


def stem_forward(x, stem):
    """
    Run a stem on a batch.

    Raises:
        ModelShapeError: channel count differs from the stem's input channels
            or the spatial size is odd
    """
    if x.dim() != 4 or x.shape[1] != stem.conv.in_channels:
        raise ModelShapeError(
            f"stem expects (N, {stem.conv.in_channels}, H, W), got {tuple(x.shape)}"
        )
    if x.shape[-1] % 2 or x.shape[-2] % 2:
        raise ModelShapeError(f"stem needs even spatial size, got {tuple(x.shape[-2:])}")
    return stem(x)
