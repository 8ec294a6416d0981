from enum import Enum, IntEnum


class DeviceLabel(IntEnum):
    """Serialized as 1 (on-body) / 0 (off-body)"""

    OffBody = 0
    OnBody = 1


class MotionLabel(str, Enum):
    Sitting = "sitting"
    Standing = "standing"
    ArmMoving = "arm_moving"
    Rotating = "rotating"
    Walking = "walking"
    Uncontrolled = "uncontrolled"

    @property
    def index(self) -> int:
        return _MOTION_ORDER.index(self)

    @classmethod
    def from_index(cls, index: int) -> "MotionLabel":
        return _MOTION_ORDER[index]

    @property
    def is_controlled(self) -> bool:
        return self is not MotionLabel.Uncontrolled


_MOTION_ORDER = (
    MotionLabel.Sitting,
    MotionLabel.Standing,
    MotionLabel.ArmMoving,
    MotionLabel.Rotating,
    MotionLabel.Walking,
    MotionLabel.Uncontrolled,
)

CONTROLLED_MOTIONS: tuple[MotionLabel, ...] = _MOTION_ORDER[:5]
N_CONTROLLED_MOTIONS = len(CONTROLLED_MOTIONS)
STATIC_MOTIONS = (MotionLabel.Sitting, MotionLabel.Standing)


def parse_motions(value: str) -> tuple[MotionLabel, ...]:
    """Parses a comma separated list of motion names, e.g. `sitting,walking`"""
    names = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(MotionLabel(n) for n in names)
