"""Scoring and statistics for gaze responses.

Accuracy is forced-choice over the 52 discrete targets: exact accuracy
requires both row and column correct, one-off accuracy allows at most one
row and one column of error (a roughly 12 degree window). Responses with
no snapped target count as incorrect rather than being dropped.

Bias and standard deviation are computed from continuous directions in
degrees of visual angle, with the sign conventions used for the bias
tables:

* column (left-right) error is positive toward the periphery of the
  looker's field: e_c = (pred_az - true_az) * s with s = sign(true_az)
  and s = +1 (toward the looker's right) for the center column;
* row (up-down) error is positive downward: e_r = true_el - pred_el.

Biases are means of the signed errors and stds are population standard
deviations, aggregated over trials in trial-id order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EvaluationError, GazekitError, ParameterError
from .geometry import N_COLS, N_ROWS, GazeDirection, SceneLayout, gaze_to_target, snap_to_target
from .models import (
    AppearFaceEyesModel,
    AppearFaceModel,
    GazePrediction,
    KinectLinearModel,
)
from .descriptor import compute_hog
from .synthlab import EYES_INVISIBLE, check_condition


@dataclass(frozen=True)
class Response:
    """One answer to one trial: a discrete target, a direction, or both."""

    trial_id: str
    predicted_target: tuple | None
    predicted_direction: GazeDirection | None = None

    def __post_init__(self):
        if self.predicted_target is None and self.predicted_direction is None:
            raise ParameterError(f"response {self.trial_id!r} carries no prediction")
        if self.predicted_target is not None:
            row, col = self.predicted_target
            if not (1 <= row <= N_ROWS and 1 <= col <= N_COLS):
                raise ParameterError(
                    f"response {self.trial_id!r} target out of range: {self.predicted_target}"
                )
            object.__setattr__(self, "predicted_target", (int(row), int(col)))


@dataclass(frozen=True)
class BiasStats:
    col_bias_deg: float
    col_std_deg: float
    row_bias_deg: float
    row_std_deg: float
    n_trials: int

    def __post_init__(self):
        values = (self.col_bias_deg, self.col_std_deg, self.row_bias_deg, self.row_std_deg)
        if not all(np.isfinite(values)):
            raise ParameterError("bias statistics must be finite")
        if self.col_std_deg < 0.0 or self.row_std_deg < 0.0:
            raise ParameterError("standard deviations must be nonnegative")


@dataclass(frozen=True)
class ColumnAccuracy:
    row_accuracy: float
    col_accuracy: float
    n_trials: int


@dataclass(frozen=True)
class PositionAccuracy:
    """Row/column accuracy per target column for one observer seat."""

    position: int
    per_column: tuple  # ((col, ColumnAccuracy), ...) sorted by col


@dataclass(frozen=True)
class EvalReport:
    looker_id: str
    condition: str
    model: str
    n_trials: int
    n_invalid: int
    exact_accuracy: float
    one_off_accuracy: float
    bias: BiasStats
    per_column: tuple  # ((col, ColumnAccuracy), ...) sorted by col

    def __post_init__(self):
        if not (0.0 <= self.exact_accuracy <= 1.0 and 0.0 <= self.one_off_accuracy <= 1.0):
            raise ParameterError("accuracies must be within [0, 1]")
        if self.one_off_accuracy < self.exact_accuracy:
            raise ParameterError("one-off accuracy cannot be below exact accuracy")


def _align(responses, truths):
    """Pair responses with truth records by trial_id; both sides must match."""
    records = {rec.trial_id: rec for rec in truths}
    if len(records) != len(tuple(truths)):
        raise EvaluationError("duplicate trial ids in truths")
    seen = set()
    pairs = []
    for resp in responses:
        if resp.trial_id in seen:
            raise EvaluationError(f"duplicate response for trial {resp.trial_id!r}")
        seen.add(resp.trial_id)
        rec = records.get(resp.trial_id)
        if rec is None:
            raise EvaluationError(f"response for unknown trial {resp.trial_id!r}")
        pairs.append((resp, rec))
    missing = set(records) - seen
    if missing:
        raise EvaluationError(f"no response for trials {sorted(missing)[:5]}")
    pairs.sort(key=lambda pair: pair[0].trial_id)
    return pairs


def _exact_hit(resp, rec) -> bool:
    return resp.predicted_target == (rec.target.row, rec.target.col)


def _one_off_hit(resp, rec) -> bool:
    if resp.predicted_target is None:
        return False
    dr = abs(resp.predicted_target[0] - rec.target.row)
    dc = abs(resp.predicted_target[1] - rec.target.col)
    return dr <= 1 and dc <= 1


def exact_accuracy(responses, truths) -> float:
    """Fraction of trials with both row and column correct."""
    pairs = _align(responses, truths)
    if not pairs:
        raise EvaluationError("no trials to score")
    return sum(_exact_hit(r, t) for r, t in pairs) / len(pairs)


def one_off_accuracy(responses, truths) -> float:
    """Fraction of trials within one row and one column of the target."""
    pairs = _align(responses, truths)
    if not pairs:
        raise EvaluationError("no trials to score")
    return sum(_one_off_hit(r, t) for r, t in pairs) / len(pairs)


def _response_azel(resp, rec, scene: SceneLayout) -> tuple[float, float]:
    if resp.predicted_direction is not None:
        d = resp.predicted_direction
    else:
        row, col = resp.predicted_target
        d = gaze_to_target(rec.eye_center, scene.grid.target(row, col))
    return d.azimuth_deg, d.elevation_deg


def _signed_errors(pairs, scene):
    col_errors = []
    row_errors = []
    for resp, rec in pairs:
        pred_az, pred_el = _response_azel(resp, rec, scene)
        true_az = rec.true_gaze.azimuth_deg
        true_el = rec.true_gaze.elevation_deg
        sign = 1.0 if true_az >= 0.0 else -1.0
        col_errors.append((pred_az - true_az) * sign)
        row_errors.append(true_el - pred_el)
    return np.array(col_errors), np.array(row_errors)


def bias_stats(responses, truths, scene: SceneLayout) -> BiasStats:
    """Mean and population std of the signed column/row errors in degrees."""
    pairs = _align(responses, truths)
    if not pairs:
        raise EvaluationError("no trials to score")
    col_e, row_e = _signed_errors(pairs, scene)
    return BiasStats(
        col_bias_deg=float(col_e.mean()),
        col_std_deg=float(col_e.std()),
        row_bias_deg=float(row_e.mean()),
        row_std_deg=float(row_e.std()),
        n_trials=len(pairs),
    )


def _per_column(pairs) -> tuple:
    by_col: dict = {}
    for resp, rec in pairs:
        by_col.setdefault(rec.target.col, []).append((resp, rec))
    out = []
    for col in sorted(by_col):
        group = by_col[col]
        row_hits = sum(
            r.predicted_target is not None and r.predicted_target[0] == t.target.row
            for r, t in group
        )
        col_hits = sum(
            r.predicted_target is not None and r.predicted_target[1] == t.target.col
            for r, t in group
        )
        out.append(
            (col, ColumnAccuracy(row_hits / len(group), col_hits / len(group), len(group)))
        )
    return tuple(out)


def position_accuracy(responses, truths, observer_position: int) -> PositionAccuracy:
    """Per-target-column row/column accuracy for one observer seat's responses."""
    if observer_position not in (1, 2, 3, 4):
        raise EvaluationError(f"unknown observer position id: {observer_position}")
    pairs = _align(responses, truths)
    if not pairs:
        raise EvaluationError("no trials to score")
    return PositionAccuracy(position=observer_position, per_column=_per_column(pairs))


# ---------------------------------------------------------------------------
# Model evaluation pipeline.


@dataclass(frozen=True)
class TrialOutcome:
    """Per-trial model output: None prediction marks a failed trial."""

    trial_id: str
    prediction: GazePrediction | None
    snapped: tuple | None  # (row, col) after discretization


def predict_trials(model, dataset, scene: SceneLayout, condition: str) -> list[TrialOutcome]:
    """Predict every trial from patches only, in trial-id order.

    ``condition`` selects the query pathway: under eyes-invisible the
    face-eyes model falls back to its head-only pathway. The annotated head
    pose is consumed only by the kinect-linear variant, which is exempt
    from the images-only rule by definition.
    """
    check_condition(condition)
    if not dataset.records:
        raise EvaluationError("empty test set")
    hog = model.config.hog
    outcomes = []
    for rec in sorted(dataset.records, key=lambda r: r.trial_id):
        try:
            pred = _predict_one(model, rec, hog, condition)
            target = snap_to_target(pred.direction, rec.eye_center, scene.grid)
            snapped = (target.row, target.col) if target is not None else None
            outcomes.append(TrialOutcome(rec.trial_id, pred, snapped))
        except GazekitError:
            outcomes.append(TrialOutcome(rec.trial_id, None, None))
    return outcomes


def _predict_one(model, rec, hog, condition) -> GazePrediction:
    if isinstance(model, KinectLinearModel):
        return model.predict(rec.annotated_head_pose)
    face = compute_hog(rec.face_patch, hog)
    if isinstance(model, AppearFaceEyesModel):
        if condition == EYES_INVISIBLE:
            return model.predict_head_only(face)
        return model.predict(face, compute_hog(rec.eyes_patch, hog))
    if isinstance(model, AppearFaceModel):
        return model.predict(face)
    raise ParameterError(f"cannot evaluate object of type {type(model).__name__}")


def outcomes_to_responses(outcomes) -> tuple[list[Response], list[str]]:
    """Split outcomes into scoreable responses and invalid trial ids."""
    responses = []
    invalid = []
    for out in outcomes:
        if out.prediction is None:
            invalid.append(out.trial_id)
        else:
            responses.append(
                Response(out.trial_id, out.snapped, out.prediction.direction)
            )
    return responses, invalid


def score_responses(
    responses,
    invalid_ids,
    records,
    scene: SceneLayout,
    model: str,
    condition: str,
) -> EvalReport:
    """Aggregate all statistics; invalid trials count as incorrect."""
    records = tuple(records)
    ids = {rec.trial_id for rec in records}
    invalid_ids = list(invalid_ids)
    claimed = {r.trial_id for r in responses} | set(invalid_ids)
    if claimed != ids or len(claimed) != len(responses) + len(invalid_ids):
        raise EvaluationError("responses + invalid ids must cover the records exactly once")

    n_total = len(records)
    valid_records = [rec for rec in records if rec.trial_id not in set(invalid_ids)]
    if not valid_records:
        raise EvaluationError("all trials failed; nothing to score")
    pairs = _align(responses, valid_records)

    exact = sum(_exact_hit(r, t) for r, t in pairs) / n_total
    one_off = sum(_one_off_hit(r, t) for r, t in pairs) / n_total
    col_e, row_e = _signed_errors(pairs, scene)
    bias = BiasStats(
        col_bias_deg=float(col_e.mean()),
        col_std_deg=float(col_e.std()),
        row_bias_deg=float(row_e.mean()),
        row_std_deg=float(row_e.std()),
        n_trials=len(pairs),
    )

    # Per-column accuracy over all records; failed trials count as misses.
    by_col: dict = {}
    scored = {r.trial_id: r for r in responses}
    for rec in records:
        by_col.setdefault(rec.target.col, []).append(rec)
    per_column = []
    for col in sorted(by_col):
        group = by_col[col]
        row_hits = col_hits = 0
        for rec in group:
            resp = scored.get(rec.trial_id)
            if resp is None or resp.predicted_target is None:
                continue
            row_hits += resp.predicted_target[0] == rec.target.row
            col_hits += resp.predicted_target[1] == rec.target.col
        per_column.append(
            (col, ColumnAccuracy(row_hits / len(group), col_hits / len(group), len(group)))
        )

    lookers = sorted({rec.looker_id for rec in records})
    return EvalReport(
        looker_id=lookers[0] if len(lookers) == 1 else "mixed",
        condition=condition,
        model=model,
        n_trials=n_total,
        n_invalid=len(invalid_ids),
        exact_accuracy=exact,
        one_off_accuracy=one_off,
        bias=bias,
        per_column=tuple(per_column),
    )


def run_evaluation(model, test_dataset, scene: SceneLayout, condition: str) -> EvalReport:
    """Predict a held-out dataset from patches only and aggregate statistics."""
    outcomes = predict_trials(model, test_dataset, scene, condition)
    responses, invalid = outcomes_to_responses(outcomes)
    return score_responses(
        responses, invalid, test_dataset.records, scene, model.variant, condition
    )


# ---------------------------------------------------------------------------
# Report serialization: a fixed-format text table and a JSON mirror. Both
# are deterministic functions of the report (no timestamps).


def _fmt2(v: float) -> str:
    # Round first so values like -1e-7 print as 0.00, not -0.00.
    return f"{round(v, 2) + 0.0:.2f}"


def report_text(report: EvalReport) -> str:
    lines = [
        "gazekit evaluation report",
        f"looker {report.looker_id}",
        f"condition {report.condition}",
        f"model {report.model}",
        f"trials {report.n_trials}",
        f"invalid {report.n_invalid}",
        f"exact_accuracy {report.exact_accuracy:.4f}",
        f"one_off_accuracy {report.one_off_accuracy:.4f}",
        "",
        "bias and standard deviation (deg)",
        "colBias colStd rowBias rowStd",
        " ".join(
            _fmt2(v)
            for v in (
                report.bias.col_bias_deg,
                report.bias.col_std_deg,
                report.bias.row_bias_deg,
                report.bias.row_std_deg,
            )
        ),
        "",
        "per-column accuracy",
        "col n row_acc col_acc",
    ]
    for col, acc in report.per_column:
        lines.append(f"{col} {acc.n_trials} {acc.row_accuracy:.4f} {acc.col_accuracy:.4f}")
    return "\n".join(lines) + "\n"


def report_json(report: EvalReport) -> str:
    payload = {
        "looker_id": report.looker_id,
        "condition": report.condition,
        "model": report.model,
        "n_trials": report.n_trials,
        "n_invalid": report.n_invalid,
        "exact_accuracy": report.exact_accuracy,
        "one_off_accuracy": report.one_off_accuracy,
        "bias": {
            "col_bias_deg": report.bias.col_bias_deg,
            "col_std_deg": report.bias.col_std_deg,
            "row_bias_deg": report.bias.row_bias_deg,
            "row_std_deg": report.bias.row_std_deg,
            "n_trials": report.bias.n_trials,
        },
        "per_column": {
            str(col): {
                "row_accuracy": acc.row_accuracy,
                "col_accuracy": acc.col_accuracy,
                "n_trials": acc.n_trials,
            }
            for col, acc in report.per_column
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(report: EvalReport, prefix) -> tuple[Path, Path]:
    """Write <prefix>.txt and <prefix>.json; returns both paths."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    txt = prefix.with_name(prefix.name + ".txt")
    js = prefix.with_name(prefix.name + ".json")
    txt.write_text(report_text(report), encoding="ascii")
    js.write_text(report_json(report), encoding="ascii")
    return txt, js
