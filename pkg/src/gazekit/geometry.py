"""Scene geometry: the concentric target grid and gaze-ray computations.

Coordinate frame (fixed convention for the whole package):

* origin at the looker's eye center, nominally 35 cm above the table;
* +Z horizontal toward the grid center (the looker's resting direction);
* +Y up, +X to the looker's right;
* the table surface is the plane y = -eye_height_cm.

Azimuth is positive toward +X, elevation positive toward +Y. All positions
are in centimeters, all angles in degrees unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, ParameterError

# Layout constants of the recording scene: four concentric target arcs on
# the table, 13 columns spaced 10 degrees apart on the table surface, eyes
# 35 cm above the table, and four observer seats across the table.
DEFAULT_RADII_CM = (29.4, 49.7, 60.6, 96.1)
DEFAULT_EYE_HEIGHT_CM = 35.0
DEFAULT_COLUMN_STEP_DEG = 10.0
N_ROWS = 4
N_COLS = 13
CENTER_COL = 7

# (distance cm, azimuth deg) per observer seat; seats 1-2 sit on the
# looker's left (negative azimuth), 3-4 are their mirror images.
OBSERVER_SEATS = (
    (180.0, -47.7),
    (138.0, -28.6),
    (138.0, +28.6),
    (180.0, +47.7),
)


def vec3(x: float, y: float, z: float) -> np.ndarray:
    """Build a finite 3D position vector (cm)."""
    v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"non-finite vector components: {v}")
    return v


def _as_vec3(value) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (3,):
        raise ParameterError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"non-finite vector components: {v}")
    return v


def angle_between_deg(u, v) -> float:
    """Angle between two nonzero vectors in degrees, robust near 0 and 180."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateGeometryError("angle of a zero-length vector is undefined")
    # atan2(|u x v|, u.v) keeps full precision for tiny angles, unlike acos.
    cross = np.linalg.norm(np.cross(u, v))
    dot = float(np.dot(u, v))
    return math.degrees(math.atan2(cross, dot))


@dataclass(frozen=True)
class GazeDirection:
    """A unit 3D gaze ray from the looker's eye center.

    Components are stored explicitly so equality and hashing behave like
    plain values. ``azimuth_deg`` is in (-180, 180], ``elevation_deg`` in
    [-90, 90].
    """

    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ParameterError(f"gaze direction must be unit length, norm={n!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))

    @classmethod
    def from_vector(cls, v) -> "GazeDirection":
        v = np.asarray(v, dtype=np.float64)
        n = float(np.linalg.norm(v))
        if not math.isfinite(n) or n == 0.0:
            raise DegenerateGeometryError("cannot normalize a zero or non-finite vector")
        return cls(float(v[0] / n), float(v[1] / n), float(v[2] / n))

    @classmethod
    def from_azel(cls, azimuth_deg: float, elevation_deg: float) -> "GazeDirection":
        az = math.radians(azimuth_deg)
        el = math.radians(elevation_deg)
        return cls.from_vector(
            (math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el))
        )

    @property
    def azimuth_deg(self) -> float:
        az = math.degrees(math.atan2(self.x, self.z))
        return 180.0 if az == -180.0 else az

    @property
    def elevation_deg(self) -> float:
        return math.degrees(math.asin(max(-1.0, min(1.0, self.y))))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def angle_to(self, other: "GazeDirection") -> float:
        """Angular separation to another direction, in degrees."""
        return angle_between_deg(self.as_array(), other.as_array())


@dataclass(frozen=True, eq=False)
class Target:
    """One physical object on the table: arc row 1..4, column 1..13."""

    row: int
    col: int
    position: np.ndarray  # (3,) cm, on the table plane

    def __post_init__(self):
        if not (1 <= self.row <= N_ROWS):
            raise ParameterError(f"target row out of range: {self.row}")
        if not (1 <= self.col <= N_COLS):
            raise ParameterError(f"target col out of range: {self.col}")
        object.__setattr__(self, "position", _as_vec3(self.position))

    def __eq__(self, other):
        if not isinstance(other, Target):
            return NotImplemented
        return (
            self.row == other.row
            and self.col == other.col
            and np.array_equal(self.position, other.position)
        )

    def __repr__(self):
        px, py, pz = self.position
        return f"Target(row={self.row}, col={self.col}, position=({px}, {py}, {pz}))"


@dataclass(frozen=True, eq=False)
class TargetGrid:
    """The 52-object concentric array: 4 rows x 13 columns."""

    targets: tuple
    radii_cm: tuple
    eye_height_cm: float
    column_step_deg: float

    def __post_init__(self):
        if len(self.targets) != N_ROWS * N_COLS:
            raise ParameterError(f"grid needs {N_ROWS * N_COLS} targets, got {len(self.targets)}")
        keys = {(t.row, t.col) for t in self.targets}
        if len(keys) != len(self.targets):
            raise ParameterError("duplicate (row, col) in grid")
        if list(self.radii_cm) != sorted(self.radii_cm) or len(set(self.radii_cm)) != N_ROWS:
            raise ParameterError("row radii must be strictly increasing")
        object.__setattr__(self, "_by_key", {(t.row, t.col): t for t in self.targets})

    def target(self, row: int, col: int) -> Target:
        try:
            return self._by_key[(row, col)]
        except KeyError:
            raise ParameterError(f"no target at (row={row}, col={col})") from None

    def __iter__(self):
        return iter(self.targets)

    def __len__(self):
        return len(self.targets)

    def __eq__(self, other):
        if not isinstance(other, TargetGrid):
            return NotImplemented
        return (
            self.targets == other.targets
            and self.radii_cm == other.radii_cm
            and self.eye_height_cm == other.eye_height_cm
            and self.column_step_deg == other.column_step_deg
        )


@dataclass(frozen=True, eq=False)
class SceneLayout:
    """Grid plus the looker eye center and the four observer seats."""

    grid: TargetGrid
    looker_eye_center: np.ndarray
    observer_positions: tuple  # four (3,) arrays, seats 1..4

    def __post_init__(self):
        object.__setattr__(self, "looker_eye_center", _as_vec3(self.looker_eye_center))
        if len(self.observer_positions) != 4:
            raise ParameterError("expected exactly 4 observer positions")
        object.__setattr__(
            self, "observer_positions", tuple(_as_vec3(p) for p in self.observer_positions)
        )

    def observer_position(self, seat: int) -> np.ndarray:
        if not (1 <= seat <= 4):
            raise ParameterError(f"unknown observer position id: {seat}")
        return self.observer_positions[seat - 1]

    def __eq__(self, other):
        if not isinstance(other, SceneLayout):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.looker_eye_center, other.looker_eye_center)
            and all(
                np.array_equal(a, b)
                for a, b in zip(self.observer_positions, other.observer_positions)
            )
        )


def build_grid(
    radii_cm=DEFAULT_RADII_CM,
    eye_height_cm: float = DEFAULT_EYE_HEIGHT_CM,
    column_step_deg: float = DEFAULT_COLUMN_STEP_DEG,
) -> TargetGrid:
    """Construct the target grid on the table plane y = -eye_height_cm.

    Target (row r, col c) sits at table azimuth (c - 7) * column_step_deg
    with horizontal distance radii_cm[r - 1] from the point under the eyes.
    Column azimuths are measured on the table surface, not as visual angles.
    """
    radii = tuple(float(r) for r in radii_cm)
    if len(radii) != N_ROWS:
        raise ParameterError(f"expected {N_ROWS} radii, got {len(radii)}")
    targets = []
    for row in range(1, N_ROWS + 1):
        radius = radii[row - 1]
        for col in range(1, N_COLS + 1):
            az = math.radians((col - CENTER_COL) * column_step_deg)
            position = vec3(
                radius * math.sin(az), -float(eye_height_cm), radius * math.cos(az)
            )
            targets.append(Target(row=row, col=col, position=position))
    return TargetGrid(
        targets=tuple(targets),
        radii_cm=radii,
        eye_height_cm=float(eye_height_cm),
        column_step_deg=float(column_step_deg),
    )


def build_scene(grid: TargetGrid | None = None, looker_eye_center=(0.0, 0.0, 0.0)) -> SceneLayout:
    """Assemble the full scene with the four mirrored observer seats."""
    if grid is None:
        grid = build_grid()
    seats = []
    for dist, az_deg in OBSERVER_SEATS:
        az = math.radians(az_deg)
        seats.append(vec3(dist * math.sin(az), 0.0, dist * math.cos(az)))
    return SceneLayout(
        grid=grid,
        looker_eye_center=_as_vec3(looker_eye_center),
        observer_positions=tuple(seats),
    )


def gaze_to_target(eye_center, target: Target) -> GazeDirection:
    """Unit direction from the eye center to a target's position."""
    eye = _as_vec3(eye_center)
    delta = target.position - eye
    if float(np.linalg.norm(delta)) == 0.0:
        raise DegenerateGeometryError(
            f"eye center coincides with target (row={target.row}, col={target.col})"
        )
    return GazeDirection.from_vector(delta)


def visual_angle_between(eye_center, a: Target, b: Target) -> float:
    """Visual angle in degrees subtended at the eye center by two targets."""
    eye = _as_vec3(eye_center)
    ra = a.position - eye
    rb = b.position - eye
    if float(np.linalg.norm(ra)) == 0.0 or float(np.linalg.norm(rb)) == 0.0:
        raise DegenerateGeometryError("eye center coincides with a target")
    return angle_between_deg(ra, rb)


def snap_to_target(direction: GazeDirection, eye_center, grid: TargetGrid) -> Target | None:
    """Discretize a continuous gaze ray to the nearest table target.

    Intersects the ray with the table plane and returns the target closest
    to the hit point (Euclidean distance on the plane). Returns None when
    the ray never reaches the plane in the forward direction. Ties break
    toward the lowest row, then the lowest column.
    """
    eye = _as_vec3(eye_center)
    d = direction.as_array()
    plane_y = -grid.eye_height_cm
    if d[1] == 0.0:
        return None
    t = (plane_y - eye[1]) / d[1]
    if t <= 0.0:
        return None
    hit = eye + t * d
    best = None
    best_key = None
    for target in grid:
        dx = hit[0] - target.position[0]
        dz = hit[2] - target.position[2]
        key = (dx * dx + dz * dz, target.row, target.col)
        if best_key is None or key < best_key:
            best_key = key
            best = target
    return best
