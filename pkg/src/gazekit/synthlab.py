"""Procedural generation of labeled gaze trials from a parametric looker.

A looker is a sphere-model head rendered by orthographic projection:
facial features (eye whites, irises, nose, mouth) sit at fixed directions
on the sphere in head coordinates, get rotated by the head pose, and are
drawn wherever the local surface faces the camera. The irises shift inside
the eye whites proportionally to the eye-gaze correction, so the rendered
appearance is a smooth, injective function of (head pose, correction)
within the scene's pose range. That is the property the nearest-neighbor
models rely on.

The ``kappa`` profile parameter is the fraction of each target's direction
covered by head rotation; the eyes supply the remainder. kappa = 1 gives a
looker whose head alone reveals the target, kappa = 0 one who only moves
their eyes.

Randomness is counter-based: each trial draws from a generator seeded by
(profile.seed, block_id, trial_index), and noise is applied in a fixed
order (pose jitter, annotation noise, pixel noise), so datasets are fully
reproducible and trials may be generated in any order or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptor import EYES_PATCH_SIZE, FACE_PATCH_SIZE, GrayPatch, extract_regions
from .errors import ParameterError
from .geometry import GazeDirection, SceneLayout, Target, gaze_to_target
from .orientation import EyeGazeCorrection, HeadPose, UnitQuaternion, correction_from

EYES_VISIBLE = "eyes-visible"
EYES_INVISIBLE = "eyes-invisible"
CONDITIONS = (EYES_VISIBLE, EYES_INVISIBLE)

RENDER_SIZE = 96

# Feature placement on the head sphere, degrees in head coordinates.
EYE_AZIMUTH_DEG = 14.0
EYE_ELEVATION_DEG = 12.0
NOSE_ELEVATION_DEG = -6.0
NOSE_RADIUS_DEG = 5.0
MOUTH_ELEVATION_DEG = -24.0
MOUTH_HALF_AZ_DEG = 16.0
MOUTH_HALF_EL_DEG = 5.0
IRIS_GAIN = 0.2  # degrees of iris offset per degree of eye-gaze correction


def check_condition(condition: str) -> str:
    if condition not in CONDITIONS:
        raise ParameterError(f"unknown condition {condition!r}, expected one of {CONDITIONS}")
    return condition


@dataclass(frozen=True)
class LookerProfile:
    """Parameters of one synthetic looker."""

    looker_id: str
    kappa: float = 0.6
    head_radius_px: float = 34.0
    eye_radius_deg: float = 9.0
    iris_radius_deg: float = 3.5
    skin_level: float = 0.78
    eye_white_level: float = 0.97
    iris_level: float = 0.06
    feature_level: float = 0.30
    background_level: float = 0.12
    dark_level: float = 0.05
    pose_jitter_deg: float = 0.0
    pixel_noise: float = 0.0
    annotation_noise_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.looker_id or not all(c.isalnum() or c in "_-" for c in self.looker_id):
            raise ParameterError(f"looker_id must be a [A-Za-z0-9_-]+ token, got {self.looker_id!r}")
        if not (0.0 <= self.kappa <= 1.0):
            raise ParameterError(f"kappa must be in [0, 1], got {self.kappa}")
        if not (4.0 <= self.head_radius_px <= RENDER_SIZE / 2 - 2):
            raise ParameterError(f"head_radius_px out of range: {self.head_radius_px}")
        if self.iris_radius_deg >= self.eye_radius_deg:
            raise ParameterError("iris must be smaller than the eye white")
        for name in ("pose_jitter_deg", "pixel_noise", "annotation_noise_deg"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")
        levels = (
            self.skin_level,
            self.eye_white_level,
            self.iris_level,
            self.feature_level,
            self.background_level,
            self.dark_level,
        )
        if any(not (0.0 <= lv <= 1.0) for lv in levels):
            raise ParameterError("intensity levels must be within [0, 1]")
        if self.seed < 0:
            raise ParameterError("seed must be a nonnegative integer")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One gaze event: patches, annotations, and ground truth."""

    trial_id: str
    looker_id: str
    block_id: int
    condition: str
    target: Target
    face_patch: GrayPatch
    eyes_patch: GrayPatch
    annotated_head_pose: HeadPose
    true_gaze: GazeDirection
    eye_center: np.ndarray
    true_head_pose: HeadPose | None = None  # synthetic ground truth; None for loaded data

    def __post_init__(self):
        check_condition(self.condition)
        eye = np.asarray(self.eye_center, dtype=np.float64)
        if eye.shape != (3,) or not np.all(np.isfinite(eye)):
            raise ParameterError(f"bad eye_center: {self.eye_center!r}")
        eye.setflags(write=False)
        object.__setattr__(self, "eye_center", eye)

    def __eq__(self, other):
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return (
            self.trial_id == other.trial_id
            and self.looker_id == other.looker_id
            and self.block_id == other.block_id
            and self.condition == other.condition
            and self.target == other.target
            and self.face_patch == other.face_patch
            and self.eyes_patch == other.eyes_patch
            and self.annotated_head_pose == other.annotated_head_pose
            and self.true_gaze == other.true_gaze
            and np.array_equal(self.eye_center, other.eye_center)
            and self.true_head_pose == other.true_head_pose
        )


@dataclass(frozen=True)
class Block:
    """All 52 targets gazed at once each, in a seeded random order."""

    block_id: int
    trials: tuple

    def __post_init__(self):
        keys = [(t.target.row, t.target.col) for t in self.trials]
        if len(self.trials) != 52 or len(set(keys)) != 52:
            raise ParameterError("a block must contain each of the 52 targets exactly once")


def _azel_dir(az_deg: float, el_deg: float) -> np.ndarray:
    az, el = math.radians(az_deg), math.radians(el_deg)
    return np.array([math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el)])


def _quat_matrix(q: UnitQuaternion) -> np.ndarray:
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def render_looker(
    profile: LookerProfile,
    head: HeadPose,
    corr: EyeGazeCorrection,
    condition: str = EYES_VISIBLE,
    rng: np.random.Generator | None = None,
) -> tuple[GrayPatch, GrayPatch]:
    """Render the face and eyes patches for one (pose, correction) pair.

    Returns the canonical 64x64 face patch and 64x16 eyes strip. The eyes
    strip is cut from a box that follows the projected eye positions, the
    way a face tracker's annotations would. In the eyes-invisible condition
    that whole box is painted a dark constant (sunglasses) before cutting.
    """
    check_condition(condition)
    if rng is None:
        rng = np.random.default_rng(profile.seed)

    size = RENDER_SIZE
    r = profile.head_radius_px
    center = (size - 1) / 2.0
    image = np.full((size, size), profile.background_level)

    iy, ix = np.mgrid[0:size, 0:size]
    dx = (ix - center) / r
    dy = (center - iy) / r
    rho2 = dx * dx + dy * dy
    inside = rho2 <= 1.0
    nz = np.sqrt(np.clip(1.0 - rho2, 0.0, None))
    shade = 0.55 + 0.45 * nz

    # Surface directions of the visible hemisphere, expressed in head
    # coordinates so features can be tested where the head "wears" them.
    normals = np.stack([dx[inside], dy[inside], nz[inside]])
    rot = _quat_matrix(head.orientation)
    local = rot.T @ normals

    sphere = np.zeros(image.shape)
    sphere[inside] = profile.skin_level * shade[inside]

    def paint_disk(direction: np.ndarray, radius_deg: float, level: float):
        cos_r = math.cos(math.radians(radius_deg))
        mask = direction @ local >= cos_r
        vals = sphere[inside]
        vals[mask] = level * shade[inside][mask]
        sphere[inside] = vals

    paint_disk(_azel_dir(0.0, NOSE_ELEVATION_DEG), NOSE_RADIUS_DEG, profile.feature_level)

    # Mouth: an ellipse in head-frame azimuth/elevation.
    az_l = np.degrees(np.arctan2(local[0], local[2]))
    el_l = np.degrees(np.arcsin(np.clip(local[1], -1.0, 1.0)))
    mouth = ((az_l / MOUTH_HALF_AZ_DEG) ** 2 + ((el_l - MOUTH_ELEVATION_DEG) / MOUTH_HALF_EL_DEG) ** 2) <= 1.0
    vals = sphere[inside]
    vals[mouth] = profile.feature_level * shade[inside][mouth]
    sphere[inside] = vals

    eye_dirs = [
        _azel_dir(-EYE_AZIMUTH_DEG, EYE_ELEVATION_DEG),
        _azel_dir(+EYE_AZIMUTH_DEG, EYE_ELEVATION_DEG),
    ]
    if condition == EYES_VISIBLE:
        yaw_c, pitch_c, _ = corr.offset.as_yaw_pitch_roll()
        max_off = profile.eye_radius_deg - profile.iris_radius_deg
        off_yaw = max(-max_off, min(max_off, IRIS_GAIN * yaw_c))
        off_pitch = max(-max_off, min(max_off, IRIS_GAIN * pitch_c))
        iris_rot = UnitQuaternion.from_yaw_pitch_roll(off_yaw, off_pitch, 0.0)
        for eye_dir in eye_dirs:
            paint_disk(eye_dir, profile.eye_radius_deg, profile.eye_white_level)
        for eye_dir in eye_dirs:
            paint_disk(iris_rot.rotate(eye_dir), profile.iris_radius_deg, profile.iris_level)

    image = np.where(inside, sphere, image)

    eye_box = _eye_box(profile, rot, eye_dirs, center, size)
    if condition == EYES_INVISIBLE:
        ex, ey, ew, eh = eye_box
        image[ey : ey + eh, ex : ex + ew] = profile.dark_level

    face, eyes = extract_regions(
        GrayPatch(image), (0, 0, size, size), eye_box, FACE_PATCH_SIZE, EYES_PATCH_SIZE
    )
    if profile.pixel_noise > 0.0:
        face = _add_noise(face, profile.pixel_noise, rng)
        eyes = _add_noise(eyes, profile.pixel_noise, rng)
    return face, eyes


def _eye_box(profile, rot, eye_dirs, center, size) -> tuple[int, int, int, int]:
    # Bounding box of both projected eye disks, padded, widened to the eyes
    # strip aspect ratio, and clamped to the image. Bounds are inclusive
    # pixel-center ranges, ceil(lo)..floor(hi): unlike half-open floor/ceil
    # boxes these mirror exactly under a left-right image flip.
    world = [rot @ d for d in eye_dirs]
    r = profile.head_radius_px
    pxs = [center + r * v[0] for v in world]
    pys = [center - r * v[1] for v in world]
    margin = 1.4 * r * math.sin(math.radians(profile.eye_radius_deg))
    y_lo = int(math.ceil(min(pys) - margin))
    y_hi = int(math.floor(max(pys) + margin))
    aspect = EYES_PATCH_SIZE[0] / EYES_PATCH_SIZE[1]
    half_w = aspect * (y_hi - y_lo + 1) / 2.0
    mid_x = (min(pxs) + max(pxs)) / 2.0
    x_lo = int(math.ceil(mid_x - half_w))
    x_hi = int(math.floor(mid_x + half_w))
    x_lo, y_lo = max(0, x_lo), max(0, y_lo)
    x_hi, y_hi = min(size - 1, x_hi), min(size - 1, y_hi)
    return x_lo, y_lo, max(1, x_hi - x_lo + 1), max(1, y_hi - y_lo + 1)


def _add_noise(patch: GrayPatch, sigma: float, rng) -> GrayPatch:
    noisy = patch.pixels + rng.normal(0.0, sigma, patch.pixels.shape)
    return GrayPatch(np.clip(noisy, 0.0, 1.0))


def trial_rng(profile: LookerProfile, block_id: int, trial_index: int) -> np.random.Generator:
    """Counter-based per-trial generator: seeded by (profile seed, block, trial)."""
    return np.random.default_rng(np.random.SeedSequence([profile.seed, block_id, trial_index]))


def generate_trial(
    profile: LookerProfile,
    scene: SceneLayout,
    target: Target,
    condition: str = EYES_VISIBLE,
    block_id: int = 0,
    trial_index: int = 0,
) -> TrialRecord:
    """Generate one labeled trial for a target.

    The head covers kappa of the target's azimuth/elevation (plus jitter),
    the eye-gaze correction supplies the exact remainder, and the annotated
    pose is the true pose perturbed by the profile's annotation noise.
    """
    check_condition(condition)
    rng = trial_rng(profile, block_id, trial_index)
    eye_center = scene.looker_eye_center
    true_gaze = gaze_to_target(eye_center, target)
    az, el = true_gaze.azimuth_deg, true_gaze.elevation_deg

    jitter = rng.normal(0.0, 1.0, 3) * profile.pose_jitter_deg
    true_head = HeadPose.from_yaw_pitch_roll(
        profile.kappa * az + jitter[0], profile.kappa * el + jitter[1], jitter[2]
    )
    corr = correction_from(true_head, true_gaze)

    ann = rng.normal(0.0, 1.0, 3) * profile.annotation_noise_deg
    yaw, pitch, roll = true_head.yaw_pitch_roll_deg
    annotated = HeadPose.from_yaw_pitch_roll(yaw + ann[0], pitch + ann[1], roll + ann[2])

    face, eyes = render_looker(profile, true_head, corr, condition, rng)
    return TrialRecord(
        trial_id=f"{profile.looker_id}-b{block_id:02d}-t{trial_index:02d}",
        looker_id=profile.looker_id,
        block_id=block_id,
        condition=condition,
        target=target,
        face_patch=face,
        eyes_patch=eyes,
        annotated_head_pose=annotated,
        true_gaze=true_gaze,
        eye_center=eye_center,
        true_head_pose=true_head,
    )


def generate_blocks(
    profile: LookerProfile,
    scene: SceneLayout,
    n_blocks: int,
    condition: str = EYES_VISIBLE,
    seed: int = 0,
) -> list[Block]:
    """Generate n_blocks blocks of 52 trials each, one per target per block."""
    if n_blocks < 1:
        raise ParameterError(f"n_blocks must be >= 1, got {n_blocks}")
    if seed < 0:
        raise ParameterError("seed must be a nonnegative integer")
    check_condition(condition)
    targets = list(scene.grid)
    blocks = []
    for b in range(n_blocks):
        order = np.random.default_rng(np.random.SeedSequence([seed, b])).permutation(len(targets))
        trials = tuple(
            generate_trial(profile, scene, targets[i], condition, block_id=b, trial_index=j)
            for j, i in enumerate(order)
        )
        blocks.append(Block(block_id=b, trials=trials))
    return blocks
