"""Command-line entry point.

Subcommands: `synth` (generate a ground-truthed synthetic recording), `run`
(full workflow: train, attribute, rank, extend; writes report.json, one
NDJSON attribution stream, one SVG chart, and one CSV table per stage), and
`eval` (cross-validated F1 only, no attribution).

Exit codes: 0 success, 2 validation error, 3 runtime error. Errors go to
stderr as one JSON line; stdout stays human-readable. Every config knob has
a flag; precedence is flag > --config file > built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .charts import render_ranking_svg, write_ranking_csv
from .config import RunConfig
from .errors import SchemaError, SeegrankError
from .gbdt import cross_validate
from .dataset import assemble, label_frames
from .dsp import featurize
from .ingest import load_recording, restrict_channels, write_recording
from .montage import Montage
from .ranking import STAGES, report_dict, run_workflow, stage_channels
from .synth import SynthSpec, generate

log = logging.getLogger(__name__)

_KNOB_FLAGS = [
    # (flag, dest, type, help)
    ("--pps-extension-s", "pps_extension_s", float, "seconds prepended to each seizure for the PPS class"),
    ("--frame-len-s", "frame_len_s", float, "frame length in seconds"),
    ("--overlap", "overlap", float, "frame overlap fraction in (0, 1)"),
    ("--band-low", "band_low", float, "bandpass low edge in Hz"),
    ("--band-high", "band_high", float, "bandpass high edge in Hz"),
    ("--filter-order", "filter_order", int, "Butterworth bandpass order (even, 2-8)"),
    ("--wavelet", "wavelet", str, "wavelet family (db1, db2, db4)"),
    ("--dwt-levels", "dwt_levels", int, "wavelet decomposition depth"),
    ("--folds", "folds", int, "cross-validation fold count"),
    ("--test-fraction", "test_fraction", float, "held-out fraction for the final model"),
    ("--rounds", "rounds", int, "boosting rounds"),
    ("--depth", "depth", int, "tree depth"),
    ("--learning-rate", "learning_rate", float, "boosting learning rate"),
    ("--lambda", "lam", float, "L2 leaf regularization"),
    ("--background-size", "background_size", int, "non-seizure background rows for masking"),
    ("--exact-max-players", "exact_max_players", int, "player cap for exact enumeration"),
    ("--elbow-inclusive", "elbow_inclusive", None, "keep the elbow channel itself (true/false)"),
    ("--seed", "seed", int, "master random seed"),
    ("--threads", "threads", int, "worker cap for per-channel feature extraction"),
]


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_knob_flags(parser: argparse.ArgumentParser) -> None:
    for flag, dest, typ, help_text in _KNOB_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ if typ else _parse_bool,
                            default=None, help=help_text)
    parser.add_argument("--config", default=None,
                        help="JSON file of config knobs (flag spellings, underscores)")


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        dest: getattr(args, dest)
        for _, dest, _, _ in _KNOB_FLAGS
        if getattr(args, dest) is not None
    }
    return cfg.replace(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seegrank",
        description="Channel-level attribution and ranking for depth-electrode recordings",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic recording with ground truth")
    p_synth.add_argument("spec", help="synth spec JSON (montage inline or by path)")
    p_synth.add_argument("--out", default=".", help="output directory")
    p_synth.add_argument("--seed", dest="seed", type=int, default=None,
                         help="override the spec's seed")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="train, attribute, rank, and extend")
    p_run.add_argument("signal", help="signal CSV")
    p_run.add_argument("sidecar", help="sidecar JSON")
    p_run.add_argument("--montage", required=True, help="montage JSON")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--stage", choices=STAGES, default=None,
                       help="run a single stage instead of all three")
    _add_knob_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="cross-validated F1 without attribution")
    p_eval.add_argument("signal", help="signal CSV")
    p_eval.add_argument("sidecar", help="sidecar JSON")
    p_eval.add_argument("--montage", required=True, help="montage JSON")
    p_eval.add_argument("--out", default=".", help="output directory")
    p_eval.add_argument("--all-stages", action="store_true",
                        help="evaluate clinician, electrode, and zone stages")
    _add_knob_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec.load(args.spec)
    if args.seed is not None:
        import dataclasses
        spec = dataclasses.replace(spec, seed=args.seed)
    rec, annotations, ground_truth = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    signal_path = os.path.join(args.out, "signal.csv")
    sidecar_path = os.path.join(args.out, "sidecar.json")
    truth_path = os.path.join(args.out, "ground_truth.json")
    write_recording(rec, annotations, spec.clinician_selected, signal_path, sidecar_path)
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(ground_truth, fh, indent=2)
        fh.write("\n")
    print(f"wrote {signal_path}, {sidecar_path}, {truth_path}")
    print(f"ground truth: ictal channels {', '.join(ground_truth['ictal_channels'])}; "
          f"{len(spec.seizures)} seizure(s); seed {spec.seed}")
    return 0


def _load_inputs(args: argparse.Namespace):
    cfg = _merge_config(args)
    montage = Montage.load(args.montage)
    rec, annotations, selected = load_recording(args.signal, args.sidecar, montage,
                                                cfg.frame_len_s)
    if not selected:
        raise SchemaError("sidecar has no clinician_selected channels to start from")
    return cfg, montage, rec, annotations, selected


def cmd_run(args: argparse.Namespace) -> int:
    cfg, montage, rec, annotations, selected = _load_inputs(args)
    stages = (args.stage,) if args.stage else STAGES
    report = run_workflow(rec, annotations, montage, selected, cfg, stages=stages)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report_dict(report, cfg), fh, indent=2)
        fh.write("\n")
    for stage in report.stages:
        ndjson_path = os.path.join(args.out, f"attributions_{stage.name}.ndjson")
        with open(ndjson_path, "w", encoding="utf-8") as fh:
            for vec in stage.attributions:
                record = {
                    "t": int(vec.t),
                    "phi": {str(ch): float(v)
                            for ch, v in zip(stage.importance.players, vec.phi)},
                    "f_full": vec.f_full,
                    "f_empty": vec.f_empty,
                }
                fh.write(json.dumps(record) + "\n")
        render_ranking_svg(os.path.join(args.out, f"ranking_{stage.name}.svg"),
                           stage, report.clinician_selected)
        write_ranking_csv(os.path.join(args.out, f"ranking_{stage.name}.csv"),
                          stage, report.clinician_selected)
        kept = ", ".join(str(ch) for ch in stage.elbow.selected)
        news = ", ".join(str(ch) for ch in report.new_findings(stage)) or "-"
        print(f"stage {stage.name}: {len(stage.channels)} channels, "
              f"mean F1 {stage.mean_f1:.4f}")
        print(f"  selected (k*={stage.elbow.k_star}): {kept}")
        print(f"  new findings: {news}")
    print(f"report: {report_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg, montage, rec, annotations, selected = _load_inputs(args)
    stages = STAGES if args.all_stages else ("clinician",)
    entries = []
    for name in stages:
        channels = stage_channels(montage, selected, name)
        stage_rec = restrict_channels(rec, channels)
        blocks = featurize(stage_rec, cfg)
        labels = label_frames(annotations, cfg, blocks[0].frame_spec, rec.sampling_rate)
        ds = assemble(blocks, labels, rec.sampling_rate)
        cv = cross_validate(ds, cfg)
        entries.append({
            "name": name,
            "n_channels": len(channels),
            "mean_f1": cv.mean_f1,
            "mean_precision": cv.mean_precision,
            "mean_recall": cv.mean_recall,
            "fold_f1": [m.f1 for m in cv.fold_metrics],
        })
        print(f"stage {name}: {len(channels)} channels, mean F1 {cv.mean_f1:.4f} "
              f"over {cfg.folds} folds")
    os.makedirs(args.out, exist_ok=True)
    eval_path = os.path.join(args.out, "eval.json")
    with open(eval_path, "w", encoding="utf-8") as fh:
        json.dump({"stages": entries, "config": cfg.to_dict()}, fh, indent=2)
        fh.write("\n")
    print(f"metrics: {eval_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SeegrankError as exc:
        _emit_error(exc)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 2
    except Exception as exc:  # noqa: BLE001  (runtime failures map to exit 3)
        _emit_error(exc)
        return 3


def _emit_error(exc: Exception) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
