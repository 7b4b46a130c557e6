"""The three gaze estimators.

* appear-face-eyes: two independent nearest-neighbor lookups. Face
  appearance retrieves head orientations, eyes appearance retrieves
  eye-gaze corrections, each averaged with weights 1/(distance + epsilon),
  and the two estimates compose into the final direction. With the eyes
  occluded the same model degrades to its head-only pathway.
* appear-face: one nearest-neighbor lookup from face appearance straight
  to the final gaze direction (renormalized weighted mean of unit vectors).
* kinect-linear: ordinary least squares from annotated (yaw, pitch, roll)
  to (azimuth, elevation), ignoring appearance entirely.

Neighbor search is an exact brute-force scan; training sets here are a few
hundred examples. All examples tied at the k-th distance are included and
neighbors are summed in a content-sorted order, so predictions do not
depend on training-set order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptor import HogDescriptor, HogParams, compute_hog
from .errors import LayoutMismatchError, ParameterError, PredictionError, SingularFitError
from .geometry import GazeDirection
from .orientation import (
    EyeGazeCorrection,
    HeadPose,
    UnitQuaternion,
    compose,
    correction_from,
    weighted_average,
)

FACE_EYES = "face-eyes"
FACE = "face"
KINECT_LINEAR = "kinect-linear"
VARIANTS = (FACE_EYES, FACE, KINECT_LINEAR)

EXACT_MATCH_TOL_DEG = 5.7295779513082e-05  # 1e-6 rad


@dataclass(frozen=True)
class ModelConfig:
    variant: str = FACE_EYES
    k: int = 5
    epsilon: float = 1e-6
    cross_looker: bool = False
    hog: HogParams = HogParams()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown model variant {self.variant!r}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not (self.epsilon > 0.0):
            raise ParameterError("epsilon must be positive")


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """One supervised gaze event: appearance descriptors plus labels.

    The labels are mutually consistent: composing the head pose with the
    eye correction reproduces the gaze direction (checked to 1e-6 rad).
    """

    face_descriptor: HogDescriptor
    eyes_descriptor: HogDescriptor | None
    head_pose: HeadPose
    eye_correction: EyeGazeCorrection
    gaze: GazeDirection
    looker_id: str

    def __post_init__(self):
        err = compose(self.head_pose, self.eye_correction).angle_to(self.gaze)
        if err > EXACT_MATCH_TOL_DEG:
            raise ParameterError(
                f"inconsistent labels: compose(head, correction) is {err:.2e} deg from gaze"
            )


def build_training_examples(records, hog_params: HogParams = HogParams()) -> list[TrainingExample]:
    """Turn trial records into training examples.

    The eye-gaze correction label is derived from the annotated head pose,
    exactly as a sensor-supervised pipeline would: whatever pose the
    annotation claims, the correction makes the composition hit the target.
    """
    examples = []
    for rec in records:
        head = rec.annotated_head_pose
        examples.append(
            TrainingExample(
                face_descriptor=compute_hog(rec.face_patch, hog_params),
                eyes_descriptor=compute_hog(rec.eyes_patch, hog_params),
                head_pose=head,
                eye_correction=correction_from(head, rec.true_gaze),
                gaze=rec.true_gaze,
                looker_id=rec.looker_id,
            )
        )
    return examples


@dataclass(frozen=True, eq=False)
class KnnIndex:
    """Exact brute-force index over one descriptor kind ("face" or "eyes")."""

    examples: tuple
    k: int
    epsilon: float
    kind: str

    def __post_init__(self):
        if self.k < 1 or self.k > len(self.examples):
            raise ParameterError(
                f"k={self.k} must be within 1..{len(self.examples)} (training set size)"
            )
        descs = []
        for ex in self.examples:
            d = ex.face_descriptor if self.kind == "face" else ex.eyes_descriptor
            if d is None:
                raise ParameterError(f"example lacks a {self.kind} descriptor")
            descs.append(d)
        layouts = {d.layout for d in descs}
        if len(layouts) != 1:
            raise LayoutMismatchError(f"mixed {self.kind} descriptor layouts: {layouts}")
        object.__setattr__(self, "_layout", descs[0].layout)
        object.__setattr__(self, "_matrix", np.stack([d.values for d in descs]))
        # Content keys order equal-distance neighbors deterministically, so
        # predictions are invariant to training-set permutation even on ties.
        keys = []
        for ex in self.examples:
            hq = ex.head_pose.orientation
            cq = ex.eye_correction.offset
            g = ex.gaze
            keys.append((hq.w, hq.x, hq.y, hq.z, cq.w, cq.x, cq.y, cq.z, g.x, g.y, g.z))
        object.__setattr__(self, "_keys", keys)

    def query(self, descriptor: HogDescriptor):
        """Return (indices, distances, weights) of the k nearest examples.

        Ties at the k-th distance are all included; entries are sorted by
        (distance, label content). Weights are 1 / (distance + epsilon).
        """
        if descriptor.layout != self._layout:
            raise LayoutMismatchError(
                f"query layout {descriptor.layout} != index layout {self._layout}"
            )
        diffs = self._matrix - descriptor.values
        dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        kth = np.partition(dists, self.k - 1)[self.k - 1]
        chosen = np.nonzero(dists <= kth)[0]
        order = sorted(chosen, key=lambda i: (dists[i], self._keys[i]))
        idx = np.array(order, dtype=np.int64)
        d = dists[idx]
        return idx, d, 1.0 / (d + self.epsilon)


@dataclass(frozen=True)
class GazePrediction:
    """A predicted direction plus introspection on how it was formed."""

    direction: GazeDirection
    head_estimate: HeadPose | None = None
    correction_estimate: EyeGazeCorrection | None = None
    neighbor_ids: tuple = ()
    neighbor_weights: tuple = ()
    eyes_neighbor_ids: tuple | None = None
    eyes_neighbor_weights: tuple | None = None


def _check_lookers(examples, config: ModelConfig):
    lookers = {ex.looker_id for ex in examples}
    if len(lookers) > 1 and not config.cross_looker:
        raise ParameterError(
            f"training set spans lookers {sorted(lookers)}; set cross_looker=True to allow"
        )


@dataclass(frozen=True, eq=False)
class AppearFaceEyesModel:
    config: ModelConfig
    examples: tuple

    def __post_init__(self):
        if not self.examples:
            raise ParameterError("cannot train on an empty dataset")
        _check_lookers(self.examples, self.config)
        k, eps = self.config.k, self.config.epsilon
        object.__setattr__(self, "face_index", KnnIndex(self.examples, k, eps, "face"))
        object.__setattr__(self, "eyes_index", KnnIndex(self.examples, k, eps, "eyes"))

    @property
    def variant(self) -> str:
        return FACE_EYES

    def looker_ids(self) -> tuple:
        return tuple(sorted({ex.looker_id for ex in self.examples}))

    def _head_estimate(self, face: HogDescriptor):
        idx, _, w = self.face_index.query(face)
        head_q = weighted_average([self.examples[i].head_pose.orientation for i in idx], w)
        return HeadPose(head_q), idx, w

    def predict(self, face: HogDescriptor, eyes: HogDescriptor) -> GazePrediction:
        head, f_idx, f_w = self._head_estimate(face)
        e_idx, _, e_w = self.eyes_index.query(eyes)
        corr_q = weighted_average(
            [self.examples[i].eye_correction.offset for i in e_idx], e_w
        )
        corr = EyeGazeCorrection(corr_q)
        return GazePrediction(
            direction=compose(head, corr),
            head_estimate=head,
            correction_estimate=corr,
            neighbor_ids=tuple(int(i) for i in f_idx),
            neighbor_weights=tuple(float(x) for x in f_w),
            eyes_neighbor_ids=tuple(int(i) for i in e_idx),
            eyes_neighbor_weights=tuple(float(x) for x in e_w),
        )

    def predict_head_only(self, face: HogDescriptor) -> GazePrediction:
        """Eyes-invisible pathway: head estimate composed with the identity."""
        head, f_idx, f_w = self._head_estimate(face)
        corr = EyeGazeCorrection.identity()
        return GazePrediction(
            direction=compose(head, corr),
            head_estimate=head,
            correction_estimate=corr,
            neighbor_ids=tuple(int(i) for i in f_idx),
            neighbor_weights=tuple(float(x) for x in f_w),
        )


@dataclass(frozen=True, eq=False)
class AppearFaceModel:
    config: ModelConfig
    examples: tuple

    def __post_init__(self):
        if not self.examples:
            raise ParameterError("cannot train on an empty dataset")
        _check_lookers(self.examples, self.config)
        k, eps = self.config.k, self.config.epsilon
        object.__setattr__(self, "face_index", KnnIndex(self.examples, k, eps, "face"))

    @property
    def variant(self) -> str:
        return FACE

    def looker_ids(self) -> tuple:
        return tuple(sorted({ex.looker_id for ex in self.examples}))

    def predict(self, face: HogDescriptor) -> GazePrediction:
        idx, _, w = self.face_index.query(face)
        vectors = np.stack([self.examples[i].gaze.as_array() for i in idx])
        total = w @ vectors
        norm = float(np.linalg.norm(total))
        if norm < 1e-12:
            raise PredictionError("neighbor gaze vectors cancel; direction undefined")
        return GazePrediction(
            direction=GazeDirection.from_vector(total),
            neighbor_ids=tuple(int(i) for i in idx),
            neighbor_weights=tuple(float(x) for x in w),
        )


@dataclass(frozen=True, eq=False)
class KinectLinearModel:
    """(azimuth, elevation) = A (yaw, pitch, roll) + b, fitted by QR least squares."""

    config: ModelConfig
    coefficients: np.ndarray  # (4, 2): three slopes per output plus intercept
    training_lookers: tuple

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.shape != (4, 2):
            raise ParameterError(f"coefficient matrix must be (4, 2), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def variant(self) -> str:
        return KINECT_LINEAR

    def looker_ids(self) -> tuple:
        return self.training_lookers

    @property
    def slope(self) -> np.ndarray:
        """A as a (2, 3) matrix mapping (yaw, pitch, roll) to (azimuth, elevation)."""
        return self.coefficients[:3].T

    @property
    def intercept(self) -> np.ndarray:
        return self.coefficients[3]

    def predict(self, head_pose: HeadPose) -> GazePrediction:
        ypr = np.array(head_pose.yaw_pitch_roll_deg)
        az, el = self.slope @ ypr + self.intercept
        return GazePrediction(direction=GazeDirection.from_azel(az, el))


def _fit_kinect_linear(examples, config: ModelConfig) -> KinectLinearModel:
    if len(examples) < 4:
        raise SingularFitError(f"need at least 4 examples, got {len(examples)}")
    x = np.array([ex.head_pose.yaw_pitch_roll_deg for ex in examples])
    design = np.column_stack([x, np.ones(len(examples))])
    y = np.array([(ex.gaze.azimuth_deg, ex.gaze.elevation_deg) for ex in examples])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max() or diag.max() == 0.0:
        raise SingularFitError("design matrix is rank deficient (degenerate pose spread)")
    coef = np.linalg.solve(r, q.T @ y)
    lookers = tuple(sorted({ex.looker_id for ex in examples}))
    return KinectLinearModel(config=config, coefficients=coef, training_lookers=lookers)


def train(examples, config: ModelConfig = ModelConfig()):
    """Train one of the three model variants on a list of TrainingExample."""
    examples = tuple(examples)
    if not examples:
        raise ParameterError("cannot train on an empty dataset")
    if config.variant == FACE_EYES:
        return AppearFaceEyesModel(config=config, examples=examples)
    if config.variant == FACE:
        return AppearFaceModel(config=config, examples=examples)
    _check_lookers(examples, config)
    return _fit_kinect_linear(examples, config)


# Spec-level operation names; thin wrappers over the model methods.


def predict_face_eyes(model, face: HogDescriptor, eyes: HogDescriptor) -> GazePrediction:
    if not isinstance(model, AppearFaceEyesModel):
        raise ParameterError(f"predict_face_eyes needs a {FACE_EYES} model, got {model.variant}")
    return model.predict(face, eyes)


def predict_face(model, face: HogDescriptor) -> GazePrediction:
    if not isinstance(model, AppearFaceModel):
        raise ParameterError(f"predict_face needs a {FACE} model, got {model.variant}")
    return model.predict(face)


def predict_kinect_linear(model, head_pose: HeadPose) -> GazePrediction:
    if not isinstance(model, KinectLinearModel):
        raise ParameterError(
            f"predict_kinect_linear needs a {KINECT_LINEAR} model, got {model.variant}"
        )
    return model.predict(head_pose)


def eyes_invisible_query(model, face: HogDescriptor) -> GazePrediction:
    if not isinstance(model, AppearFaceEyesModel):
        raise ParameterError(
            f"eyes_invisible_query needs a {FACE_EYES} model, got {model.variant}"
        )
    return model.predict_head_only(face)


# ---------------------------------------------------------------------------
# Persistence: a small versioned binary container with a JSON header and raw
# little-endian float64 blocks. No timestamps or environment data, so equal
# models serialize to equal bytes.

MODEL_MAGIC = b"GZKM"
MODEL_VERSION = 1


def _config_dict(config: ModelConfig) -> dict:
    return {
        "variant": config.variant,
        "k": config.k,
        "epsilon": config.epsilon,
        "cross_looker": config.cross_looker,
        "hog": {
            "cell_size": config.hog.cell_size,
            "n_bins": config.hog.n_bins,
            "block_size": config.hog.block_size,
            "clip_threshold": config.hog.clip_threshold,
        },
    }


def _config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        variant=d["variant"],
        k=d["k"],
        epsilon=d["epsilon"],
        cross_looker=d["cross_looker"],
        hog=HogParams(**d["hog"]),
    )


def save_model(model, path) -> None:
    """Serialize a trained model; loading reproduces predictions bit-exactly."""
    arrays: list[tuple[str, np.ndarray]] = []
    header: dict = {
        "format": "gazekit-model",
        "version": MODEL_VERSION,
        "config": _config_dict(model.config),
    }
    if isinstance(model, KinectLinearModel):
        header["training_lookers"] = list(model.training_lookers)
        arrays.append(("coefficients", model.coefficients))
    elif isinstance(model, (AppearFaceEyesModel, AppearFaceModel)):
        ex = model.examples
        header["example_lookers"] = [e.looker_id for e in ex]
        header["face_layout"] = list(ex[0].face_descriptor.layout)
        arrays.append(("face", np.stack([e.face_descriptor.values for e in ex])))
        if all(e.eyes_descriptor is not None for e in ex):
            header["eyes_layout"] = list(ex[0].eyes_descriptor.layout)
            arrays.append(("eyes", np.stack([e.eyes_descriptor.values for e in ex])))
        else:
            header["eyes_layout"] = None
        arrays.append(("head_q", np.stack([e.head_pose.orientation.as_array() for e in ex])))
        arrays.append(("corr_q", np.stack([e.eye_correction.offset.as_array() for e in ex])))
        arrays.append(("gaze", np.stack([e.gaze.as_array() for e in ex])))
    else:
        raise ParameterError(f"cannot serialize object of type {type(model).__name__}")

    header["arrays"] = [[name, list(a.shape)] for name, a in arrays]
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IQ", MODEL_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_model(path):
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ParameterError(f"{path}: not a gazekit model file")
    version, header_len = struct.unpack("<IQ", raw[4:16])
    if version != MODEL_VERSION:
        raise ParameterError(f"{path}: unsupported model version {version}")
    header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    config = _config_from_dict(header["config"])

    offset = 16 + header_len
    arrays = {}
    for name, shape in header["arrays"]:
        n = int(np.prod(shape))
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(shape)
        offset += n * 8

    if config.variant == KINECT_LINEAR:
        return KinectLinearModel(
            config=config,
            coefficients=arrays["coefficients"],
            training_lookers=tuple(header["training_lookers"]),
        )

    face_layout = tuple(header["face_layout"])
    eyes_layout = tuple(header["eyes_layout"]) if header["eyes_layout"] else None
    examples = []
    for i, looker in enumerate(header["example_lookers"]):
        eyes_desc = None
        if eyes_layout is not None:
            eyes_desc = HogDescriptor(values=arrays["eyes"][i], layout=eyes_layout)
        examples.append(
            TrainingExample(
                face_descriptor=HogDescriptor(values=arrays["face"][i], layout=face_layout),
                eyes_descriptor=eyes_desc,
                head_pose=HeadPose(UnitQuaternion(*arrays["head_q"][i])),
                eye_correction=EyeGazeCorrection(UnitQuaternion(*arrays["corr_q"][i])),
                gaze=GazeDirection(*arrays["gaze"][i]),
                looker_id=looker,
            )
        )
    cls = AppearFaceEyesModel if config.variant == FACE_EYES else AppearFaceModel
    return cls(config=config, examples=tuple(examples))
