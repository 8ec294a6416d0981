import json
from pathlib import Path
from typing import Literal, Optional, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from typing_extensions import Self

from .destination import Destination, as_destination
from .errors import FormatVersionError, InvalidConfigError
from .labels import MotionLabel

CONFIG_VERSION = 1

T = TypeVar("T", bound="VersionedConfig")


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class VersionedConfig(FrozenModel):
    config_version: Literal[1] = CONFIG_VERSION
    """Version of the config document schema. Bumped on incompatible changes"""


class MotionAmplitudes(FrozenModel):
    motion_amp_db: float = Field(ge=0)
    """RMS amplitude of the motion band (0.5-15 Hz) component"""

    multipath_amp_db: float = Field(ge=0)
    """RMS amplitude of the high frequency multipath fading component"""

    shadowing_amp_db: float = Field(ge=0)
    """RMS amplitude of the slow (< 0.5 Hz) shadowing / LOS drift component"""


def _default_amplitudes() -> dict[MotionLabel, MotionAmplitudes]:
    return {
        MotionLabel.Sitting: MotionAmplitudes(
            motion_amp_db=0.4, multipath_amp_db=2.0, shadowing_amp_db=1.0
        ),
        MotionLabel.Standing: MotionAmplitudes(
            motion_amp_db=0.6, multipath_amp_db=2.0, shadowing_amp_db=1.0
        ),
        MotionLabel.ArmMoving: MotionAmplitudes(
            motion_amp_db=3.0, multipath_amp_db=2.5, shadowing_amp_db=1.5
        ),
        MotionLabel.Rotating: MotionAmplitudes(
            motion_amp_db=3.5, multipath_amp_db=2.5, shadowing_amp_db=2.0
        ),
        MotionLabel.Walking: MotionAmplitudes(
            motion_amp_db=5.0, multipath_amp_db=3.0, shadowing_amp_db=2.0
        ),
        MotionLabel.Uncontrolled: MotionAmplitudes(
            motion_amp_db=4.0, multipath_amp_db=3.0, shadowing_amp_db=2.0
        ),
    }


def _default_tone_bands() -> dict[MotionLabel, tuple[float, float]]:
    return {
        MotionLabel.Sitting: (0.5, 2.0),
        MotionLabel.Standing: (0.5, 3.0),
        MotionLabel.ArmMoving: (1.0, 6.0),
        MotionLabel.Rotating: (0.5, 4.0),
        MotionLabel.Walking: (1.5, 10.0),
        MotionLabel.Uncontrolled: (0.5, 15.0),
    }


class SynthConfig(VersionedConfig):
    sample_rate_hz: float = Field(500.0, gt=0)
    """Sampling rate of generated traces"""

    duration_s: float = 30.0
    """Length of one generated trace. Must be at least one segment (5 s)"""

    base_rss_dbm: float = -60.0
    """Mean received signal level"""

    motion_band_hz: tuple[float, float] = (0.5, 15.0)
    """Band holding body motion induced fluctuations"""

    drift_band_hz: tuple[float, float] = (0.02, 0.45)
    """Band of the slow shadowing / LOS drift tones, below the motion band"""

    amplitudes: dict[MotionLabel, MotionAmplitudes] = Field(
        default_factory=_default_amplitudes
    )
    """Per motion amplitude table"""

    tone_bands_hz: dict[MotionLabel, tuple[float, float]] = Field(
        default_factory=_default_tone_bands
    )
    """Per motion frequency range of the motion tones, inside motion_band_hz"""

    tone_count: tuple[int, int] = (3, 8)
    """Inclusive range of the number of motion tones per trace"""

    drift_tone_count: int = Field(3, ge=1)
    """Number of tones composing the shadowing drift"""

    noise_floor_db: float = Field(0.2, ge=0)
    """Standard deviation of the white measurement noise"""

    on_body_multipath_factor: float = Field(0.1, ge=0)
    """Fraction of the multipath amplitude present on on-body links"""

    off_body_motion_leakage: float = Field(0.3, ge=0)
    """Fraction of the motion amplitude leaking into off-body links"""

    filter_taps: int = 1001
    """Tap count of the high-pass kernel that shapes the multipath noise"""

    @model_validator(mode="after")
    def _check_bands(self) -> Self:
        lo, hi = self.motion_band_hz
        if not 0 < lo < hi < self.sample_rate_hz / 2:
            raise ValueError("motion_band_hz must satisfy 0 < low < high < fs/2")
        d_lo, d_hi = self.drift_band_hz
        if not 0 < d_lo < d_hi <= lo:
            raise ValueError("drift_band_hz must lie below the motion band")
        for motion in MotionLabel:
            if motion not in self.amplitudes:
                raise ValueError(f"amplitudes misses motion {motion.value}")
            band = self.tone_bands_hz.get(motion)
            if band is None:
                raise ValueError(f"tone_bands_hz misses motion {motion.value}")
            if not lo <= band[0] < band[1] <= hi:
                raise ValueError(
                    f"tone band of {motion.value} must lie inside the motion band"
                )
        if not 1 <= self.tone_count[0] <= self.tone_count[1]:
            raise ValueError("tone_count must be an increasing positive range")
        return self


class ArchConfig(VersionedConfig):
    name: str = "conv8-v1"
    """Name of the architecture, cited by experiments"""

    input_dim: int = Field(380, gt=0)
    """Length of a propagation profile"""

    conv_channels: tuple[int, ...] = (8, 8, 16, 16, 32, 32, 64, 64)
    """Output channels of the convolutional layers of the extractor"""

    conv_strides: tuple[int, ...] = (1, 2, 1, 2, 1, 2, 1, 2)
    """Stride per convolutional layer"""

    kernel_width: int = 5
    """Width of every convolution kernel, odd (same padding)"""

    representation_dim: int = Field(64, gt=0)
    """Width of E(x)"""

    predictor_hidden: tuple[int, ...] = (32, 32)
    """Hidden widths of the on-off predictor, which ends in a 2-way softmax"""

    discriminator_hidden: tuple[int, ...] = (32, 32)
    """Hidden widths of the motion discriminator, which ends in an n_z-way softmax"""

    head_init_scale: float = Field(0.01, gt=0)
    """Scale of the initial weights of both output layers, keeps initial outputs near uniform"""

    @model_validator(mode="after")
    def _check_layers(self) -> Self:
        if len(self.conv_channels) != len(self.conv_strides):
            raise ValueError("conv_channels and conv_strides must have equal length")
        if not self.conv_channels:
            raise ValueError("the extractor needs at least one convolutional layer")
        if any(c <= 0 for c in self.conv_channels) or any(
            s <= 0 for s in self.conv_strides
        ):
            raise ValueError("channels and strides must be positive")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ValueError("kernel_width must be odd")
        if any(h <= 0 for h in self.predictor_hidden + self.discriminator_hidden):
            raise ValueError("hidden widths must be positive")
        return self


class TrainConfig(VersionedConfig):
    model_config = ConfigDict(populate_by_name=True)

    lambda_: float = Field(
        1.0,
        alias="lambda",
        ge=0,
        description=(
            "Weight of the discriminator loss in the value function, normally > 0. "
            "0 is accepted: training then reduces exactly to the baseline, "
            "which the baseline equivalence runs rely on"
        ),
    )

    lr_ep: float = Field(1e-3, gt=0)
    """Learning rate of the extractor and the predictor"""

    lr_d: float = Field(1e-3, gt=0)
    """Learning rate of the discriminator"""

    momentum: float = Field(0.9, ge=0, lt=1)
    """SGD momentum of both optimizers"""

    batch_size: int = Field(64, gt=0)

    epochs: int = Field(100, gt=0)

    seed: int = Field(0, ge=0)

    d_steps_per_ep_step: int = Field(1, ge=1)
    """Discriminator descent steps before each extractor / predictor step"""

    early_stopping_patience: Optional[int] = Field(20, gt=0)
    """Epochs without held-out predictor loss improvement before stopping. None disables"""


class ExperimentRecipe(VersionedConfig):
    trace_duration_s: float = Field(30.0, ge=5)
    """Duration of each synthesized trace"""

    controlled_traces_per_cell: int = Field(100, ge=0)
    """Traces per (device label, controlled motion) cell"""

    uncontrolled_traces_per_link: int = Field(100, ge=0)
    """Uncontrolled traces per device label"""

    train_count: int = Field(4800, ge=2)
    """Controlled segments drawn for training, balanced on/off"""

    controlled_test_count: int = Field(1200, ge=0)
    """Remaining controlled segments used for testing, balanced on/off"""

    uncontrolled_test_count: int = Field(1200, ge=0)
    """Uncontrolled segments used for testing, balanced on/off"""

    validation_fraction: float = Field(0.1, ge=0, lt=1)
    """Share of the training draw held back, balanced, to drive early stopping"""


def config_to_json(config: BaseModel) -> str:
    return json.dumps(config.model_dump(mode="json", by_alias=True), sort_keys=True, indent=2)


def parse_config(data: Union[str, dict], model: type[T]) -> T:
    try:
        doc = json.loads(data) if isinstance(data, str) else dict(data)
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"Config is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise InvalidConfigError("Config document must be a JSON object")
    version = doc.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise FormatVersionError(
            f"Unsupported config_version {version} for {model.__name__}, expected {CONFIG_VERSION}"
        )
    try:
        return model.model_validate(doc)
    except ValidationError as e:
        raise InvalidConfigError(f"Invalid {model.__name__}: {e}") from e


def load_config(source: Union[Destination, Path, str], model: type[T]) -> T:
    dest = as_destination(source).require("Config file")
    return parse_config(dest.read_str(), model)


def default_synth_config() -> SynthConfig:
    """The versioned defaults shipped with the package"""
    from importlib import resources

    text = (
        resources.files("rss2onbody")
        .joinpath("defaults/synth_config.json")
        .read_text(encoding="utf-8")
    )
    return parse_config(text, SynthConfig)
