"""
Multi-channel attention (MCA).

Three gates are computed from the input and summed:

    spatial  : channel-wise max + mean -> BN -> sigmoid            (N, 1, H, W)
    height   : permute to (N, H, C, W), max + mean over (C, W),
               1x1 conv H -> C [-> 1x1 conv C -> C] -> BN -> sigmoid (N, C, 1, 1)
    width    : the same with W in place of H                      (N, C, 1, 1)

The output is x + x * (spatial + height + width). The height/width
projections take H (or W) input channels, so a module is tied to the spatial
size it was built for.

The bracketed C -> C conv is on by default (`mca_channel_mix=True`); it puts
the default network at 358,625 parameters. With `mca_channel_mix=False` each
axis gate is exactly 1x1 conv H -> C, then BN, then sigmoid.
"""

import torch
from torch import nn

from dronerf.src.errors import ModelShapeError


def _max_plus_mean(x, dims):
    return torch.amax(x, dim=dims, keepdim=True) + torch.mean(x, dim=dims, keepdim=True)


class AxisGate(nn.Module):
    """
    Gate for one spatial axis; input is the pooled (N, size, 1, 1) descriptor.

    channel_mix=False gives proj -> BN -> sigmoid with no C -> C conv.
    """

    def __init__(self, size, channels, channel_mix=True):
        super().__init__()
        self.proj = nn.Conv2d(size, channels, kernel_size=1)
        self.mix = nn.Conv2d(channels, channels, kernel_size=1) if channel_mix else nn.Identity()
        self.norm = nn.BatchNorm2d(channels)

    def forward(self, pooled):
        return torch.sigmoid(self.norm(self.mix(self.proj(pooled))))


class MultiChannelAttention(nn.Module):

    def __init__(self, channels, size, channel_mix=True):
        super().__init__()
        self.channels = channels
        self.size = size
        self.spatial_norm = nn.BatchNorm2d(1)
        self.height_gate = AxisGate(size, channels, channel_mix)
        self.width_gate = AxisGate(size, channels, channel_mix)

    def gates(self, x):
        """Sum of the three sigmoid gates, broadcast to x's shape."""
        _, c, h, w = x.shape
        if h != w:
            raise ModelShapeError(f"MCA needs square maps, got {h}x{w}")
        if h != self.size or c != self.channels:
            raise ModelShapeError(
                f"MCA built for {self.channels}x{self.size}x{self.size}, got {c}x{h}x{w}"
            )

        spatial = torch.sigmoid(self.spatial_norm(_max_plus_mean(x, (1,))))

        by_height = x.permute(0, 2, 1, 3)          # N, H, C, W
        height = self.height_gate(_max_plus_mean(by_height, (2, 3)))

        by_width = x.permute(0, 3, 2, 1)           # N, W, H, C
        width = self.width_gate(_max_plus_mean(by_width, (2, 3)))

        return spatial + height + width

    def forward(self, x):
        return x + x * self.gates(x)


def mca_forward(x, module):
    """Apply an MCA module; raises ModelShapeError on non-square or mismatched maps."""
    if x.dim() != 4:
        raise ModelShapeError(f"MCA expects a 4-D batch, got {tuple(x.shape)}")
    return module(x)
