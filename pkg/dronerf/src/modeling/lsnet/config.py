"""
LSNet architecture configuration.

Defaults give the [16, 32, 64, 128] network with [3, 4, 6] MCAC blocks for a
128x128 single-channel spectrogram.
"""

from dataclasses import asdict, dataclass

from dronerf.src.errors import ConfigurationError


INPUT_SIZE = 128
STEM_GROUPS = 4


@dataclass(frozen=True)
class LSNetConfig:
    stage_channels: tuple = (16, 32, 64)
    head_width: int = 128
    stage_depths: tuple = (3, 4, 6)
    num_classes: int = 7
    droppath_max: float = 0.1
    input_channels: int = 1
    expansion: int = 4
    input_size: int = INPUT_SIZE
    mca_channel_mix: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        object.__setattr__(self, "stage_depths", tuple(int(d) for d in self.stage_depths))

    @property
    def widths(self):
        """The [16, 32, 64, 128] channel vector."""
        return list(self.stage_channels) + [self.head_width]

    @property
    def stage_sizes(self):
        """Spatial size entering each stage (two stems halve twice, each downsample once)."""
        size = self.input_size // 4
        return [size // (2 ** i) for i in range(len(self.stage_channels))]

    @property
    def total_blocks(self):
        return sum(self.stage_depths)

    def validate(self):
        """
        Raises:
            ConfigurationError: inconsistent widths/depths or out-of-range values
        """
        if len(self.stage_channels) != len(self.stage_depths) or not self.stage_depths:
            raise ConfigurationError("stage_channels and stage_depths must have equal non-zero length")
        if any(d < 1 for d in self.stage_depths):
            raise ConfigurationError("every stage needs at least one block")
        if any(c < 1 for c in self.stage_channels) or self.head_width < 1:
            raise ConfigurationError("channel widths must be positive")
        if self.stage_channels[0] % STEM_GROUPS != 0:
            raise ConfigurationError(f"stem width must be divisible by {STEM_GROUPS} group-norm groups")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if not (0.0 <= self.droppath_max < 1.0):
            raise ConfigurationError(f"droppath_max must be in [0, 1), got {self.droppath_max}")
        if self.input_channels not in (1, 2):
            raise ConfigurationError("input_channels must be 1 or 2")
        if self.expansion < 1:
            raise ConfigurationError("expansion must be >= 1")
        downsamplings = 2 + len(self.stage_channels) - 1
        if self.input_size % (2 ** downsamplings) != 0:
            raise ConfigurationError(
                f"input_size {self.input_size} is not divisible by 2**{downsamplings}"
            )
        return self

    def to_dict(self):
        data = asdict(self)
        data["stage_channels"] = list(self.stage_channels)
        data["stage_depths"] = list(self.stage_depths)
        return data

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, cls):
            return data
        known = {k: v for k, v in dict(data or {}).items() if k in cls.__dataclass_fields__}
        return cls(**known)
