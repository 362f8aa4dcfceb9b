"""Channel ranking, elbow cutoff, and the three-stage comparison workflow.

Channels are sorted by signed mean attribution (positive pushes the model
toward the seizure class). The cutoff is the discrete second difference of
the sorted values: the rank where the decline in importance slows hardest.
The workflow compares the clinician selection against its electrode and
zone extensions, retraining and re-attributing per stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .dataset import PPS, FrameDataset, assemble, label_frames, split
from .dsp import featurize
from .errors import EmptyDataset, EmptySequence
from .gbdt import CvResult, GbdtModel, GbdtParams, cross_validate, train
from .ingest import Recording, restrict_channels
from .montage import ChannelLabel, Montage, electrode_extension, zone_extension
from .shapley import (
    BackgroundSet,
    ChannelImportance,
    CoalitionPlayers,
    ShapFrameVector,
    mean_importance,
    shap_sequence,
)

log = logging.getLogger(__name__)

STAGES = ("clinician", "electrode", "zone")


def rank(importance: ChannelImportance) -> list[tuple[ChannelLabel, float]]:
    """Channels by descending mean attribution; ties by (electrode, index)."""
    if len(importance.players) == 0:
        raise EmptySequence("nothing to rank")
    pairs = list(zip(importance.players, (float(v) for v in importance.phi)))
    return sorted(pairs, key=lambda pv: (-pv[1], pv[0]))


@dataclass(frozen=True)
class ElbowResult:
    order: tuple[ChannelLabel, ...]
    values: tuple[float, ...]
    k_star: int
    selected: tuple[ChannelLabel, ...]
    second_diffs: tuple[float, ...]


def elbow(ranked: list[tuple[ChannelLabel, float]], inclusive: bool = True) -> ElbowResult:
    """Cut the descending ranking at the sharpest slowdown in decline.

    With 1-based rank k over values v, d_k = v_{k-1} - 2 v_k + v_{k+1} for
    interior k in [2, K-1]; k_star is the earliest argmax. Rankings shorter
    than 3 keep everything (k_star = K). `inclusive` keeps the elbow channel
    itself; turning it off drops rank k_star (never below one channel).
    """
    order = tuple(label for label, _ in ranked)
    values = tuple(v for _, v in ranked)
    K = len(values)
    if K < 3:
        k_star = K
        second_diffs: tuple[float, ...] = ()
    else:
        v = np.asarray(values)
        second_diffs = tuple(v[:-2] - 2 * v[1:-1] + v[2:])
        k_star = 2 + int(np.argmax(second_diffs))
    keep = k_star if inclusive else max(1, k_star - 1)
    return ElbowResult(
        order=order,
        values=values,
        k_star=k_star,
        selected=order[:keep],
        second_diffs=second_diffs,
    )


@dataclass(frozen=True)
class StageResult:
    name: str
    channels: tuple[ChannelLabel, ...]
    cv: CvResult
    model: GbdtModel
    importance: ChannelImportance
    elbow: ElbowResult
    attributions: tuple[ShapFrameVector, ...]

    @property
    def mean_f1(self) -> float:
        return self.cv.mean_f1


def run_stage(rec: Recording, annotations, montage: Montage, channels, cfg: RunConfig,
              name: str = "stage") -> StageResult:
    """Evaluate and attribute one channel set end to end.

    Restrict, featurize, label, cross-validate, train the final model on the
    train split, attribute every frame labeled PPS against a non-seizure
    background, rank, and cut at the elbow. Deterministic under cfg.seed.
    """
    channels = tuple(channels)
    if not channels:
        raise EmptyDataset(f"stage {name!r} has an empty channel set")
    for ch in channels:
        montage.resolve(ch)
    stage_rec = restrict_channels(rec, channels)
    blocks = featurize(stage_rec, cfg)
    labels = label_frames(annotations, cfg, blocks[0].frame_spec, rec.sampling_rate)
    ds = assemble(blocks, labels, rec.sampling_rate)
    cv = cross_validate(ds, cfg)
    train_ds, _ = split(ds, cfg)
    model = train(train_ds.X, train_ds.y, GbdtParams.from_config(cfg), ds.feature_names)
    players = CoalitionPlayers.from_dataset(ds)
    background = BackgroundSet.draw(ds, cfg.background_size, cfg.seed)
    pps_rows = np.flatnonzero(ds.y == PPS)
    if len(pps_rows) == 0:
        raise EmptySequence("no PPS frames to attribute")
    seq = shap_sequence(model, ds.X[pps_rows], pps_rows, players, background,
                        max_players=cfg.exact_max_players)
    importance = mean_importance(seq, players)
    cut = elbow(rank(importance), cfg.elbow_inclusive)
    log.info("stage %s: %d channels, mean F1 %.4f, elbow keeps %d",
             name, len(channels), cv.mean_f1, len(cut.selected))
    return StageResult(
        name=name,
        channels=channels,
        cv=cv,
        model=model,
        importance=importance,
        elbow=cut,
        attributions=tuple(seq),
    )


@dataclass(frozen=True)
class ExtensionReport:
    clinician_selected: tuple[ChannelLabel, ...]
    stages: tuple[StageResult, ...]

    def new_findings(self, stage: StageResult) -> tuple[ChannelLabel, ...]:
        """Elbow-selected channels the clinicians had not marked."""
        clin = set(self.clinician_selected)
        return tuple(ch for ch in stage.elbow.selected if ch not in clin)


def stage_channels(montage: Montage, clinician_selected, stage: str) -> tuple[ChannelLabel, ...]:
    if stage == "clinician":
        return tuple(clinician_selected)
    if stage == "electrode":
        return tuple(electrode_extension(montage, clinician_selected))
    if stage == "zone":
        return tuple(zone_extension(montage, clinician_selected))
    raise EmptyDataset(f"unknown stage {stage!r}; expected one of {STAGES}")


def run_workflow(rec: Recording, annotations, montage: Montage, clinician_selected,
                 cfg: RunConfig, stages=STAGES) -> ExtensionReport:
    """Clinician set, electrode extension, zone extension: one stage each."""
    clinician_selected = tuple(clinician_selected)
    results = []
    for stage in stages:
        channels = stage_channels(montage, clinician_selected, stage)
        results.append(run_stage(rec, annotations, montage, channels, cfg, name=stage))
    return ExtensionReport(clinician_selected=clinician_selected, stages=tuple(results))


def report_dict(report: ExtensionReport, cfg: RunConfig) -> dict:
    """JSON-ready report with stable key order."""
    stages = []
    for stage in report.stages:
        clin = set(report.clinician_selected)
        stages.append({
            "name": stage.name,
            "n_channels": len(stage.channels),
            "channels": [str(ch) for ch in stage.channels],
            "mean_f1": stage.cv.mean_f1,
            "mean_precision": stage.cv.mean_precision,
            "mean_recall": stage.cv.mean_recall,
            "fold_f1": [m.f1 for m in stage.cv.fold_metrics],
            "ranking": [
                {
                    "channel": str(ch),
                    "phi": float(v),
                    "clinician_selected": ch in clin,
                }
                for ch, v in zip(stage.elbow.order, stage.elbow.values)
            ],
            "k_star": stage.elbow.k_star,
            "selected": [str(ch) for ch in stage.elbow.selected],
            "new_findings": [str(ch) for ch in report.new_findings(stage)],
            "n_attributed_frames": stage.importance.n_frames,
        })
    return {
        "clinician_selected": [str(ch) for ch in report.clinician_selected],
        "stages": stages,
        "config": cfg.to_dict(),
    }
