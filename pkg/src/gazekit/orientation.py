"""Unit-quaternion algebra for head pose and eye-gaze correction.

The resting head direction is +Z (the geometry module's forward axis).
Euler angles use intrinsic yaw (about +Y), then pitch, then roll (about the
forward axis), in degrees. Pitch is positive upward, so a head at
(yaw, pitch) = (a, e) with zero roll points at azimuth a, elevation e.

A gaze direction carries no roll information, so ``rotation_to`` fixes the
minimal (zero-roll) rotation taking +Z to the direction; for the antiparallel
direction it picks the 180 degree rotation about +Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PredictionError
from .geometry import GazeDirection

FORWARD = np.array([0.0, 0.0, 1.0])


def _canonical(w: float, x: float, y: float, z: float):
    # q and -q are the same rotation; pick the representative whose first
    # nonzero component is positive so equality and serialization are stable.
    for c in (w, x, y, z):
        if c > 0.0:
            return w, x, y, z
        if c < 0.0:
            return -w, -x, -y, -z
    raise ParameterError("zero quaternion has no canonical sign")


@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first unit quaternion (w, x, y, z) with w >= 0 canonical sign."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ParameterError(f"quaternion must be unit length, norm={n!r}")
        # Canonicalize the sign but do not renormalize: construction must be
        # bit-idempotent so serialized quaternions round-trip exactly.
        w, x, y, z = _canonical(float(self.w), float(self.x), float(self.y), float(self.z))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_components(cls, w: float, x: float, y: float, z: float) -> "UnitQuaternion":
        """Normalize arbitrary nonzero components into a unit quaternion."""
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if not math.isfinite(n) or n == 0.0:
            raise ParameterError("cannot normalize a zero or non-finite quaternion")
        return cls(w / n, x / n, y / n, z / n)

    @classmethod
    def from_axis_angle(cls, axis, angle_deg: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=np.float64)
        n = float(np.linalg.norm(axis))
        if n == 0.0:
            raise ParameterError("rotation axis must be nonzero")
        half = math.radians(angle_deg) / 2.0
        s = math.sin(half) / n
        return cls(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    @classmethod
    def from_yaw_pitch_roll(cls, yaw_deg: float, pitch_deg: float, roll_deg: float = 0.0):
        qy = cls.from_axis_angle((0.0, 1.0, 0.0), yaw_deg)
        qx = cls.from_axis_angle((1.0, 0.0, 0.0), -pitch_deg)  # pitch-up positive
        qz = cls.from_axis_angle((0.0, 0.0, 1.0), roll_deg)
        return qy * qx * qz

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v) -> np.ndarray:
        """Rotate a 3-vector: q v q*."""
        v = np.asarray(v, dtype=np.float64)
        qv = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(qv, v)
        return v + self.w * t + np.cross(qv, t)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def as_yaw_pitch_roll(self) -> tuple[float, float, float]:
        """Euler angles in degrees; ill-conditioned at |pitch| = 90."""
        w, x, y, z = self.w, self.x, self.y, self.z
        r02 = 2.0 * (x * z + w * y)
        r22 = 1.0 - 2.0 * (x * x + y * y)
        r12 = 2.0 * (y * z - w * x)
        r10 = 2.0 * (x * y + w * z)
        r11 = 1.0 - 2.0 * (x * x + z * z)
        yaw = math.degrees(math.atan2(r02, r22))
        pitch = math.degrees(math.asin(max(-1.0, min(1.0, r12))))
        roll = math.degrees(math.atan2(r10, r11))
        return yaw, pitch, roll

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Geodesic rotation angle between two orientations, degrees."""
        # Chord length keeps precision for tiny angles where the dot
        # product saturates at 1: |q - p| = 2 sin(theta / 4).
        a = self.as_array()
        b = other.as_array()
        chord = min(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
        return math.degrees(4.0 * math.asin(min(1.0, chord / 2.0)))


@dataclass(frozen=True)
class HeadPose:
    """3D head orientation, independent of eye rotation."""

    orientation: UnitQuaternion

    @classmethod
    def identity(cls) -> "HeadPose":
        return cls(UnitQuaternion.identity())

    @classmethod
    def from_yaw_pitch_roll(cls, yaw_deg: float, pitch_deg: float, roll_deg: float = 0.0):
        return cls(UnitQuaternion.from_yaw_pitch_roll(yaw_deg, pitch_deg, roll_deg))

    @property
    def yaw_pitch_roll_deg(self) -> tuple[float, float, float]:
        return self.orientation.as_yaw_pitch_roll()

    def forward(self) -> GazeDirection:
        return GazeDirection.from_vector(self.orientation.rotate(FORWARD))


@dataclass(frozen=True)
class EyeGazeCorrection:
    """Relative rotation the eyes add on top of the head's forward direction."""

    offset: UnitQuaternion

    @classmethod
    def identity(cls) -> "EyeGazeCorrection":
        return cls(UnitQuaternion.identity())


def compose(head: HeadPose, corr: EyeGazeCorrection) -> GazeDirection:
    """Final gaze direction: head orientation followed by the eye offset."""
    return GazeDirection.from_vector((head.orientation * corr.offset).rotate(FORWARD))


def rotation_to(gaze: GazeDirection) -> UnitQuaternion:
    """Minimal rotation taking +Z to the gaze direction (zero roll)."""
    v = gaze.as_array()
    w = 1.0 + v[2]
    if w <= 1e-12:
        # Antiparallel to +Z: rotate 180 degrees about +Y by convention.
        return UnitQuaternion(0.0, 0.0, 1.0, 0.0)
    # Half-way quaternion between +Z and v; axis = z cross v is roll-free.
    return UnitQuaternion.from_components(w, -v[1], v[0], 0.0)


def correction_from(head: HeadPose, gaze: GazeDirection) -> EyeGazeCorrection:
    """Eye-gaze offset such that compose(head, offset) reproduces the gaze.

    This is the rotation-space difference between the full gaze rotation and
    the head orientation.
    """
    return EyeGazeCorrection(head.orientation.conjugate() * rotation_to(gaze))


def weighted_average(quats, weights) -> UnitQuaternion:
    """Similarity-weighted mean orientation.

    Inputs are sign-aligned to the highest-weight quaternion, summed
    component-wise with the given nonnegative weights, and renormalized.
    Accurate for tightly clustered orientations (the nearest-neighbor case);
    antipodal inputs that cancel raise PredictionError.
    """
    qs = list(quats)
    ws = np.asarray(list(weights), dtype=np.float64)
    if len(qs) == 0:
        raise ParameterError("cannot average an empty set of orientations")
    if ws.shape != (len(qs),):
        raise ParameterError("one weight per quaternion required")
    if np.any(ws < 0.0) or not np.all(np.isfinite(ws)):
        raise ParameterError("weights must be finite and nonnegative")
    if not np.any(ws > 0.0):
        raise ParameterError("at least one weight must be positive")

    arr = np.stack([q.as_array() for q in qs])
    ref = arr[int(np.argmax(ws))]
    signs = np.where(arr @ ref < 0.0, -1.0, 1.0)
    total = (ws * signs) @ arr
    norm = float(np.linalg.norm(total))
    if norm < 1e-12:
        raise PredictionError("quaternion average is degenerate (inputs cancel)")
    total /= norm
    return UnitQuaternion(*total)
