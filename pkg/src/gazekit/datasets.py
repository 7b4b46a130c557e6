"""Dataset manifests and raster patch I/O.

This is the boundary through which trial data enters the pipeline, whether
synthesized or derived from real recordings. A dataset on disk is one
manifest file plus a ``patches/`` directory of binary PGM (P5) images next
to it.

Manifest format, schema version 1 (plain text, ``\\n`` line endings, one
token separator ``" "``, floats written with ``repr`` so they round-trip
exactly):

    gazekit-manifest 1
    scene eye_height_cm <float>
    scene radii_cm <float> <float> <float> <float>
    scene column_step_deg <float>
    scene looker_eye_center <x> <y> <z>
    scene observer_1 <x> <y> <z>
    scene observer_2 <x> <y> <z>
    scene observer_3 <x> <y> <z>
    scene observer_4 <x> <y> <z>
    fields trial_id looker_id block_id condition target_row target_col
        face_patch eyes_patch head_qw head_qx head_qy head_qz eye_x eye_y
        eye_z target_x target_y target_z
    record <18 tokens, one line per trial>

(The ``fields`` header is a single line; it is wrapped above for
readability.) Positions are centimeters, quaternions scalar-first unit
values, ``condition`` is ``eyes-visible`` or ``eyes-invisible``, and patch
paths are relative to the manifest's directory. The per-record target
position is stored even though the nominal grid implies it, so real
datasets can override the nominal geometry.

Reading validates eagerly: unknown schema versions, malformed lines,
non-unit quaternions, out-of-range targets, duplicate trial ids, and
missing patch files each raise a distinct error naming the line, trial, or
path. Writing is byte-deterministic, and write -> read -> write reproduces
the same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptor import GrayPatch, rgb_to_gray
from .errors import (
    ManifestError,
    ManifestInvariantError,
    MissingPatchError,
    ParameterError,
    RecordParseError,
    UnknownSchemaError,
)
from .geometry import SceneLayout, Target, TargetGrid, build_grid, gaze_to_target
from .orientation import HeadPose, UnitQuaternion
from .synthlab import Block, TrialRecord, check_condition

MANIFEST_MAGIC = "gazekit-manifest"
MANIFEST_VERSION = 1

FIELDS = (
    "trial_id looker_id block_id condition target_row target_col "
    "face_patch eyes_patch head_qw head_qx head_qy head_qz "
    "eye_x eye_y eye_z target_x target_y target_z"
)


@dataclass(frozen=True)
class Dataset:
    """A scene layout plus an ordered collection of trial records."""

    scene: SceneLayout
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.trial_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ParameterError("duplicate trial ids in dataset")

    def __len__(self):
        return len(self.records)

    def looker_ids(self) -> tuple:
        return tuple(sorted({r.looker_id for r in self.records}))

    def conditions(self) -> tuple:
        return tuple(sorted({r.condition for r in self.records}))


def dataset_from_blocks(scene: SceneLayout, blocks: list[Block]) -> Dataset:
    records = []
    for block in blocks:
        records.extend(block.trials)
    return Dataset(scene=scene, records=tuple(records))


# ---------------------------------------------------------------------------
# Raster I/O: binary PGM (P5) for grayscale, binary PPM (P6) read-only.


def write_pgm(path, patch: GrayPatch) -> None:
    data = np.round(patch.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{patch.width} {patch.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def read_patch(path) -> GrayPatch:
    """Read a binary PGM (P5) or PPM (P6) file as a grayscale patch."""
    raw = Path(path).read_bytes()
    magic, dims, offset = _parse_raster_header(raw, path)
    if magic == "P5":
        w, h, maxval = dims
        count = w * h
        pixels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)
        gray = pixels.reshape(h, w).astype(np.float64) / maxval
    else:
        w, h, maxval = dims
        count = w * h * 3
        pixels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)
        gray = rgb_to_gray(pixels.reshape(h, w, 3).astype(np.float64) / maxval)
    return GrayPatch(gray)


def _parse_raster_header(raw: bytes, path) -> tuple[str, tuple[int, int, int], int]:
    magic = raw[:2].decode("ascii", errors="replace")
    if magic not in ("P5", "P6"):
        raise RecordParseError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")
    tokens = []
    i = 2
    while len(tokens) < 3:
        if i >= len(raw):
            raise RecordParseError(f"{path}: truncated raster header")
        c = raw[i : i + 1]
        if c == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j : j + 1].isspace():
                j += 1
            tokens.append(raw[i:j])
            i = j
    i += 1  # single whitespace byte before the raster
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise RecordParseError(f"{path}: non-numeric raster header") from None
    if w < 1 or h < 1 or not (0 < maxval <= 255):
        raise RecordParseError(f"{path}: unsupported raster dimensions {w}x{h}/{maxval}")
    expected = w * h * (3 if magic == "P6" else 1)
    if len(raw) - i < expected:
        raise RecordParseError(f"{path}: raster data truncated")
    return magic, (w, h, maxval), i


# ---------------------------------------------------------------------------
# Manifest writing.


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec_str(v) -> str:
    return " ".join(_fmt(c) for c in v)


def _check_token(value: str, what: str) -> str:
    if not value or not all(c.isalnum() or c in "_-" for c in value):
        raise ParameterError(f"{what} must be a [A-Za-z0-9_-]+ token, got {value!r}")
    return value


def write_manifest(dataset: Dataset, path) -> None:
    """Write a dataset as a manifest plus a patches/ directory of PGM files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    patches_dir = path.parent / "patches"
    patches_dir.mkdir(exist_ok=True)

    scene = dataset.scene
    lines = [
        f"{MANIFEST_MAGIC} {MANIFEST_VERSION}",
        f"scene eye_height_cm {_fmt(scene.grid.eye_height_cm)}",
        f"scene radii_cm {' '.join(_fmt(r) for r in scene.grid.radii_cm)}",
        f"scene column_step_deg {_fmt(scene.grid.column_step_deg)}",
        f"scene looker_eye_center {_vec_str(scene.looker_eye_center)}",
    ]
    for i, pos in enumerate(scene.observer_positions, start=1):
        lines.append(f"scene observer_{i} {_vec_str(pos)}")
    lines.append(f"fields {FIELDS}")

    for rec in dataset.records:
        _check_token(rec.trial_id, "trial_id")
        _check_token(rec.looker_id, "looker_id")
        face_rel = f"patches/{rec.trial_id}_face.pgm"
        eyes_rel = f"patches/{rec.trial_id}_eyes.pgm"
        write_pgm(path.parent / face_rel, rec.face_patch)
        write_pgm(path.parent / eyes_rel, rec.eyes_patch)
        q = rec.annotated_head_pose.orientation
        lines.append(
            " ".join(
                [
                    "record",
                    rec.trial_id,
                    rec.looker_id,
                    str(rec.block_id),
                    rec.condition,
                    str(rec.target.row),
                    str(rec.target.col),
                    face_rel,
                    eyes_rel,
                    _fmt(q.w),
                    _fmt(q.x),
                    _fmt(q.y),
                    _fmt(q.z),
                    _vec_str(rec.eye_center),
                    _vec_str(rec.target.position),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# Manifest reading with eager validation.


def _parse_floats(tokens, line_no, what) -> list[float]:
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise RecordParseError(f"line {line_no}: non-numeric {what}: {tokens}") from None
    if not all(math.isfinite(v) for v in values):
        raise RecordParseError(f"line {line_no}: non-finite {what}: {tokens}")
    return values


def read_manifest(path) -> Dataset:
    """Read and validate a manifest; every invariant is checked eagerly."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    text = path.read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise UnknownSchemaError(f"{path}: empty manifest")

    head = lines[0].split()
    if len(head) != 2 or head[0] != MANIFEST_MAGIC:
        raise UnknownSchemaError(f"{path}: not a gazekit manifest: {lines[0]!r}")
    if head[1] != str(MANIFEST_VERSION):
        raise UnknownSchemaError(f"{path}: unsupported schema version {head[1]!r}")

    scene_values: dict = {}
    records = []
    seen_ids: set = set()
    fields_seen = False
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            raise RecordParseError(f"line {line_no}: blank line in manifest")
        kind = tokens[0]
        if kind == "scene":
            if len(tokens) < 3:
                raise RecordParseError(f"line {line_no}: malformed scene line")
            scene_values[tokens[1]] = _parse_floats(tokens[2:], line_no, tokens[1])
        elif kind == "fields":
            if " ".join(tokens[1:]) != FIELDS:
                raise RecordParseError(f"line {line_no}: unexpected field list")
            fields_seen = True
        elif kind == "record":
            if not fields_seen:
                raise RecordParseError(f"line {line_no}: record before fields header")
            records.append(_parse_record(tokens[1:], line_no, path.parent, seen_ids))
        else:
            raise RecordParseError(f"line {line_no}: unknown line kind {kind!r}")

    scene = _scene_from_values(scene_values, path)
    grid = scene.grid
    final = []
    for rec_values in records:
        final.append(_finish_record(rec_values, grid, scene))
    return Dataset(scene=scene, records=tuple(final))


def _scene_from_values(values: dict, path) -> SceneLayout:
    required = ["eye_height_cm", "radii_cm", "column_step_deg", "looker_eye_center"]
    required += [f"observer_{i}" for i in range(1, 5)]
    for key in required:
        if key not in values:
            raise RecordParseError(f"{path}: manifest missing scene {key}")
    try:
        grid = build_grid(
            radii_cm=values["radii_cm"],
            eye_height_cm=values["eye_height_cm"][0],
            column_step_deg=values["column_step_deg"][0],
        )
        return SceneLayout(
            grid=grid,
            looker_eye_center=np.array(values["looker_eye_center"]),
            observer_positions=tuple(np.array(values[f"observer_{i}"]) for i in range(1, 5)),
        )
    except ParameterError as e:
        raise RecordParseError(f"{path}: invalid scene layout: {e}") from None


def _parse_record(tokens, line_no, base_dir, seen_ids) -> dict:
    if len(tokens) != 18:
        raise RecordParseError(f"line {line_no}: expected 18 record tokens, got {len(tokens)}")
    trial_id, looker_id, block_s, condition, row_s, col_s, face_rel, eyes_rel = tokens[:8]
    floats = _parse_floats(tokens[8:], line_no, "record values")

    if trial_id in seen_ids:
        raise ManifestInvariantError(f"line {line_no}: duplicate trial_id {trial_id!r}")
    seen_ids.add(trial_id)
    try:
        block_id = int(block_s)
        row, col = int(row_s), int(col_s)
    except ValueError:
        raise RecordParseError(f"line {line_no}: non-integer block/row/col") from None
    try:
        check_condition(condition)
    except ParameterError:
        raise ManifestInvariantError(
            f"trial {trial_id!r}: unknown condition {condition!r}"
        ) from None

    qw, qx, qy, qz = floats[0:4]
    norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    if abs(norm - 1.0) > 1e-6:
        raise ManifestInvariantError(
            f"trial {trial_id!r}: head pose quaternion has norm {norm!r}"
        )

    face_path = base_dir / face_rel
    eyes_path = base_dir / eyes_rel
    for p in (face_path, eyes_path):
        if not p.exists():
            raise MissingPatchError(f"trial {trial_id!r}: missing patch file {p}")

    return {
        "trial_id": trial_id,
        "looker_id": looker_id,
        "block_id": block_id,
        "condition": condition,
        "row": row,
        "col": col,
        "face_path": face_path,
        "eyes_path": eyes_path,
        "quat": (qw, qx, qy, qz),
        "eye_center": floats[4:7],
        "target_pos": floats[7:10],
    }


def _finish_record(values: dict, grid: TargetGrid, scene: SceneLayout) -> TrialRecord:
    trial_id = values["trial_id"]
    try:
        target = Target(row=values["row"], col=values["col"], position=values["target_pos"])
    except ParameterError as e:
        raise ManifestInvariantError(f"trial {trial_id!r}: {e}") from None
    qw, qx, qy, qz = values["quat"]
    norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    if abs(norm - 1.0) <= 1e-9:
        # Already unit: construct directly so our own writes round-trip
        # bit-exactly (write -> read -> write byte stability).
        quat = UnitQuaternion(qw, qx, qy, qz)
    else:
        quat = UnitQuaternion.from_components(qw, qx, qy, qz)
    eye_center = np.array(values["eye_center"])
    try:
        true_gaze = gaze_to_target(eye_center, target)
    except Exception as e:
        raise ManifestInvariantError(f"trial {trial_id!r}: degenerate gaze geometry: {e}") from None
    return TrialRecord(
        trial_id=trial_id,
        looker_id=values["looker_id"],
        block_id=values["block_id"],
        condition=values["condition"],
        target=target,
        face_patch=read_patch(values["face_path"]),
        eyes_patch=read_patch(values["eyes_path"]),
        annotated_head_pose=HeadPose(quat),
        true_gaze=true_gaze,
        eye_center=eye_center,
        true_head_pose=None,
    )
