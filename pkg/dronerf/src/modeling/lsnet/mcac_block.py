"""
MCAC residual block and drop-path.

    x_out = x + DropPath(Conv1x1(GELU(Conv1x1(BN(MCA(DW3x3(x)))))))
"""

from contextlib import contextmanager

import torch
from torch import nn

from dronerf.src.errors import ModelShapeError
from dronerf.src.modeling.lsnet.attention import MultiChannelAttention


class DropPath(nn.Module):
    """
    Per-sample stochastic depth with survival rescaling.

    Randomness comes from self.generator when set (the trainer installs a
    seeded generator), otherwise from torch's global generator.
    """

    def __init__(self, rate=0.0):
        super().__init__()
        self.rate = float(rate)
        self.generator = None

    def forward(self, x):
        if not self.training or self.rate <= 0.0:
            return x
        if self.rate >= 1.0:
            return torch.zeros_like(x)
        keep = 1.0 - self.rate
        shape = (x.shape[0],) + (1,) * (x.dim() - 1)
        noise = torch.rand(shape, generator=self.generator, dtype=x.dtype, device=x.device)
        mask = (noise < keep).to(x.dtype)
        return x * mask / keep

    def extra_repr(self):
        return f"rate={self.rate:.4f}"


class MCACBlock(nn.Module):

    def __init__(self, channels, size, expansion=4, drop_path=0.0, channel_mix=True):
        super().__init__()
        self.channels = channels
        self.depthwise = nn.Conv2d(channels, channels, kernel_size=3, padding=1, groups=channels)
        self.attention = MultiChannelAttention(channels, size, channel_mix)
        self.norm = nn.BatchNorm2d(channels)
        self.expand = nn.Conv2d(channels, expansion * channels, kernel_size=1)
        self.act = nn.GELU()
        self.project = nn.Conv2d(expansion * channels, channels, kernel_size=1)
        self.drop_path = DropPath(drop_path)

    def branch(self, x):
        x = self.depthwise(x)
        x = self.attention(x)
        x = self.norm(x)
        x = self.expand(x)
        x = self.act(x)
        return self.project(x)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ModelShapeError(f"MCAC block expects {self.channels} channels, got {x.shape[1]}")
        return x + self.drop_path(self.branch(x))


@contextmanager
def _temporary_mode(block, droppath_rate, mode):
    previous_rate = block.drop_path.rate
    previous_training = block.training
    try:
        if droppath_rate is not None:
            block.drop_path.rate = float(droppath_rate)
        if mode is not None:
            block.train(mode == "train")
        yield block
    finally:
        block.drop_path.rate = previous_rate
        block.train(previous_training)


def mcac_forward(x, block, droppath_rate=None, mode=None):
    """
    Run one MCAC block, optionally overriding its drop-path rate and mode.

    Args:
        x (torch.Tensor): (N, C, H, W)
        block (MCACBlock)
        droppath_rate (float): rate in [0, 1] for this call only
        mode (str): 'train' or 'eval' for this call only

    Raises:
        ModelShapeError: channel mismatch
    """
    if mode not in (None, "train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    with _temporary_mode(block, droppath_rate, mode):
        return block(x)
