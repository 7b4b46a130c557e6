"""Command-line front end: synth | train | predict | eval.

Every subcommand is a deterministic function of its flags (seeds included):
same flags, same bytes on disk. There are no default cache or model
directories; every path is explicit. Flags can be preloaded from a JSON
config file via --config, with command-line flags taking precedence.

Errors exit nonzero with a single machine-parseable line on stderr:
``error:<ErrorClass>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import Dataset, dataset_from_blocks, read_manifest, write_manifest
from .descriptor import HogParams
from .errors import GazekitError, ParameterError, RecordParseError
from .evalkit import (
    Response,
    outcomes_to_responses,
    predict_trials,
    score_responses,
    write_report,
)
from .geometry import GazeDirection, build_scene
from .models import (
    KINECT_LINEAR,
    KinectLinearModel,
    ModelConfig,
    VARIANTS,
    build_training_examples,
    load_model,
    save_model,
    train,
)
from .synthlab import EYES_INVISIBLE, EYES_VISIBLE, LookerProfile, generate_blocks

CONDITION_FLAGS = {"visible": EYES_VISIBLE, "invisible": EYES_INVISIBLE}

PREDICTIONS_MAGIC = "gazekit-predictions"
PREDICTIONS_VERSION = 1
PREDICTIONS_FIELDS = (
    "trial_id dir_x dir_y dir_z azimuth_deg elevation_deg row col "
    "face_neighbors eyes_neighbors"
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazekit",
        description="Synthesize gaze datasets, train gaze models, and score them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory for manifest + patches")
    p.add_argument("--looker-id", default="L1")
    p.add_argument("--kappa", type=float, default=0.6,
                   help="fraction of the target angle covered by head rotation")
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--condition", choices=sorted(CONDITION_FLAGS), default="visible")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pose-jitter", type=float, default=0.0, help="head pose noise sigma, deg")
    p.add_argument("--pixel-noise", type=float, default=0.0, help="image noise sigma")
    p.add_argument("--annotation-noise", type=float, default=0.0,
                   help="pose annotation noise sigma, deg")
    p.add_argument("--head-radius", type=float, default=34.0, help="rendered head radius, px")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--model", choices=VARIANTS, default="face-eyes")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--cell-size", type=int, default=8)
    p.add_argument("--bins", type=int, default=9)
    p.add_argument("--block-size", type=int, default=2)
    p.add_argument("--clip", type=float, default=0.2)
    p.add_argument("--cross-looker", action="store_true",
                   help="allow training across multiple looker identities")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-trial predictions for a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--out", required=True, help="output predictions file")
    p.add_argument("--condition", choices=sorted(CONDITION_FLAGS), default=None,
                   help="query pathway; defaults to the dataset's condition")
    p.add_argument("--strict-looker", action="store_true",
                   help="error (not warn) on train/test looker mismatch")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a model on a dataset and write reports")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--out-prefix", required=True, help="reports go to <prefix>.txt/.json")
    p.add_argument("--condition", choices=sorted(CONDITION_FLAGS), default=None)
    p.add_argument("--strict-looker", action="store_true")
    p.set_defaults(func=cmd_eval)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="JSON file of flag defaults")
    return parser


def _apply_config(parser, argv):
    """Load --config JSON as subcommand defaults; explicit flags override."""
    if not argv:
        return
    sub_name = argv[0]
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path is None:
        return
    try:
        values = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParameterError(f"cannot read config file {config_path}: {e}") from None
    if not isinstance(values, dict):
        raise ParameterError(f"config file {config_path} must hold a JSON object")

    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    sp = sub_actions[0].choices.get(sub_name)
    if sp is None:
        return
    dests = {a.dest: a for a in sp._actions}
    unknown = set(values) - set(dests)
    if unknown:
        raise ParameterError(f"unknown config keys for {sub_name}: {sorted(unknown)}")
    typed = {}
    for key, value in values.items():
        action = dests[key]
        typed[key] = action.type(value) if action.type and value is not None else value
    sp.set_defaults(**typed)


def _resolve_condition(dataset: Dataset, flag: str | None) -> str:
    if flag is not None:
        return CONDITION_FLAGS[flag]
    conditions = dataset.conditions()
    if len(conditions) != 1:
        raise ParameterError(
            f"dataset mixes conditions {conditions}; pass --condition explicitly"
        )
    return conditions[0]


def _check_lookers(model, dataset: Dataset, strict: bool) -> None:
    train_ids = set(model.looker_ids())
    test_ids = set(dataset.looker_ids())
    if train_ids != test_ids:
        msg = f"train lookers {sorted(train_ids)} != test lookers {sorted(test_ids)}"
        if strict:
            raise ParameterError(msg)
        print(f"warning: {msg}", file=sys.stderr)


def cmd_synth(args) -> int:
    condition = CONDITION_FLAGS[args.condition]
    profile = LookerProfile(
        looker_id=args.looker_id,
        kappa=args.kappa,
        head_radius_px=args.head_radius,
        pose_jitter_deg=args.pose_jitter,
        pixel_noise=args.pixel_noise,
        annotation_noise_deg=args.annotation_noise,
        seed=args.seed,
    )
    scene = build_scene()
    blocks = generate_blocks(profile, scene, args.blocks, condition, seed=args.seed)
    dataset = dataset_from_blocks(scene, blocks)
    manifest = Path(args.out) / "dataset.manifest"
    write_manifest(dataset, manifest)
    print(
        f"synth: 1 looker ({profile.looker_id}), {len(blocks)} blocks, "
        f"{len(dataset)} trials -> {manifest}"
    )
    return 0


def cmd_train(args) -> int:
    dataset = read_manifest(args.manifest)
    config = ModelConfig(
        variant=args.model,
        k=args.k,
        epsilon=args.epsilon,
        cross_looker=args.cross_looker,
        hog=HogParams(
            cell_size=args.cell_size,
            n_bins=args.bins,
            block_size=args.block_size,
            clip_threshold=args.clip,
        ),
    )
    examples = build_training_examples(dataset.records, config.hog)
    model = train(examples, config)
    save_model(model, args.out)
    print(f"train: variant={config.variant} examples={len(examples)} -> {args.out}")
    if isinstance(model, KinectLinearModel):
        for name, row, off in zip(("azimuth", "elevation"), model.slope, model.intercept):
            print(
                f"  {name} = {row[0]:+.6f}*yaw {row[1]:+.6f}*pitch "
                f"{row[2]:+.6f}*roll {off:+.6f}"
            )
    return 0


def _fmt(x: float) -> str:
    return repr(float(x))


def _neighbors_str(ids, weights) -> str:
    if ids is None or len(ids) == 0:
        return "-"
    return ";".join(f"{i}:{_fmt(w)}" for i, w in zip(ids, weights))


def write_predictions(outcomes, model_name: str, path) -> None:
    lines = [
        f"{PREDICTIONS_MAGIC} {PREDICTIONS_VERSION}",
        f"model {model_name}",
        f"fields {PREDICTIONS_FIELDS}",
    ]
    for out in outcomes:
        if out.prediction is None:
            lines.append(f"pred {out.trial_id} - - - - - - - - -")
            continue
        d = out.prediction.direction
        row = str(out.snapped[0]) if out.snapped else "-"
        col = str(out.snapped[1]) if out.snapped else "-"
        lines.append(
            " ".join(
                [
                    "pred",
                    out.trial_id,
                    _fmt(d.x),
                    _fmt(d.y),
                    _fmt(d.z),
                    _fmt(d.azimuth_deg),
                    _fmt(d.elevation_deg),
                    row,
                    col,
                    _neighbors_str(out.prediction.neighbor_ids, out.prediction.neighbor_weights),
                    _neighbors_str(
                        out.prediction.eyes_neighbor_ids, out.prediction.eyes_neighbor_weights
                    ),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_predictions(path) -> tuple[list[Response], list[str], str]:
    """Parse a predictions file into scoreable responses plus invalid ids."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != f"{PREDICTIONS_MAGIC} {PREDICTIONS_VERSION}":
        raise RecordParseError(f"{path}: not a gazekit predictions file")
    if len(lines) < 3 or not lines[1].startswith("model ") or not lines[2].startswith("fields "):
        raise RecordParseError(f"{path}: malformed predictions header")
    model_name = lines[1].split(" ", 1)[1]
    responses: list[Response] = []
    invalid: list[str] = []
    for line_no, line in enumerate(lines[3:], start=4):
        tokens = line.split()
        if len(tokens) != 11 or tokens[0] != "pred":
            raise RecordParseError(f"{path} line {line_no}: malformed prediction line")
        trial_id = tokens[1]
        if tokens[2] == "-":
            invalid.append(trial_id)
            continue
        try:
            direction = GazeDirection(float(tokens[2]), float(tokens[3]), float(tokens[4]))
        except (ValueError, GazekitError) as e:
            raise RecordParseError(f"{path} line {line_no}: bad direction: {e}") from None
        target = None
        if tokens[7] != "-":
            try:
                target = (int(tokens[7]), int(tokens[8]))
            except ValueError:
                raise RecordParseError(f"{path} line {line_no}: bad target") from None
        responses.append(Response(trial_id, target, direction))
    return responses, invalid, model_name


def cmd_predict(args) -> int:
    model = load_model(args.model_file)
    dataset = read_manifest(args.manifest)
    condition = _resolve_condition(dataset, args.condition)
    _check_lookers(model, dataset, args.strict_looker)
    outcomes = predict_trials(model, dataset, dataset.scene, condition)
    write_predictions(outcomes, model.variant, args.out)
    n_invalid = sum(1 for o in outcomes if o.prediction is None)
    print(f"predict: {len(outcomes)} trials ({n_invalid} invalid) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model_file)
    dataset = read_manifest(args.manifest)
    condition = _resolve_condition(dataset, args.condition)
    _check_lookers(model, dataset, args.strict_looker)
    outcomes = predict_trials(model, dataset, dataset.scene, condition)
    responses, invalid = outcomes_to_responses(outcomes)
    report = score_responses(
        responses, invalid, dataset.records, dataset.scene, model.variant, condition
    )
    txt, js = write_report(report, args.out_prefix)
    print(
        f"eval: looker={report.looker_id} condition={report.condition} "
        f"model={report.model} exact={report.exact_accuracy:.4f} "
        f"one_off={report.one_off_accuracy:.4f} -> {txt} {js}"
    )
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except GazekitError as e:
        print(f"error:{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error:{type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
