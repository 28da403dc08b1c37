"""Command-line front door: validate | windows | sdom | dist-hist | metrics | synth | report.

All outputs are written atomically (temp file + rename) into the --out
directory; fatal errors produce machine-readable JSON on stderr and a
non-zero exit status. Defaults reproduce the reference configuration:
T=24, stride=6, N=35, k=17, centering on, anomaly score polarity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

from .analysis import distances_to_mean, latent_distances, mean_tensor, sdom_report
from .core import DataError, FeatureType, SkelstatError, Split, WindowingConfig
from .features import CenterPolicy, build_windows, serialize_windows
from .ingest import (
    DatasetBundle,
    ScorePolarity,
    load_bundle,
    parse_embeddings,
    parse_labels,
    parse_manifest,
    parse_scores,
    serialize_labels,
    serialize_manifest,
    serialize_scores,
    serialize_tracklets,
    validate_bundle,
)
from .metrics import metrics_report, metrics_report_per_video, pr_curve, roc_curve
from .stats import box_stats, difficulty_report, histogram, histogram_rows, parse_binning
from .synth import (
    GroupConverge,
    PoseDeform,
    SynthSpec,
    TrajectoryShift,
    generate,
    oracle_scores,
)

_FEATURES = {f.value: f for f in FeatureType}


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(header: List[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _config_from_args(args) -> WindowingConfig:
    return WindowingConfig(
        T=args.t,
        stride=args.stride,
        k=args.keypoints,
        N=args.nodes,
        frame_width=args.width,
        frame_height=args.height,
        hip_indices=(11, 12) if args.keypoints >= 13 else (0, 1),
    )


def _load_bundle(args) -> DatasetBundle:
    return load_bundle(args.tracklets, args.labels, args.manifest, _config_from_args(args))


def _center_policy(args) -> CenterPolicy:
    return CenterPolicy.NONE if args.no_center else CenterPolicy.FIRST_POSE_TO_FRAME_CENTER


def _feature(args, default: str = "pose") -> FeatureType:
    return _FEATURES[args.feature or default]


def cmd_validate(args) -> int:
    report = validate_bundle(_load_bundle(args))
    atomic_write_text(Path(args.out) / "validation.json", _json_text(report.to_dict()))
    return 0 if report.ok else 1


def cmd_windows(args) -> int:
    feature = _feature(args)
    windows = build_windows(_load_bundle(args), feature, _center_policy(args), args.truncate_social)
    atomic_write_text(Path(args.out) / f"windows_{feature.value}.txt", serialize_windows(windows))
    return 0


def _split_windows(windows):
    by_split = {s: [] for s in Split}
    for w in windows:
        by_split[w.split].append(w)
    return by_split


def cmd_sdom(args) -> int:
    feature = _feature(args)
    windows = build_windows(_load_bundle(args), feature, _center_policy(args), args.truncate_social)
    by_split = _split_windows(windows)
    report = sdom_report(
        by_split[Split.TRAIN], by_split[Split.VAL_NORMAL], by_split[Split.VAL_ANOMALOUS], feature
    )
    atomic_write_text(Path(args.out) / "sdom.json", _json_text(report.to_dict()))
    return 0


def cmd_disthist(args) -> int:
    binning = parse_binning(args.binning)
    out = Path(args.out)
    if args.embeddings:
        if args.feature:
            raise DataError("--embeddings and --feature are mutually exclusive")
        with open(args.embeddings, "r", encoding="utf-8") as fh:
            records, prior = parse_embeddings(fh.read())
        series_by_split = latent_distances(records, prior)
        tag = "latent"
    else:
        feature = _feature(args)
        windows = build_windows(
            _load_bundle(args), feature, _center_policy(args), args.truncate_social
        )
        by_split = _split_windows(windows)
        if not by_split[Split.TRAIN]:
            raise DataError("no training windows; cannot compute the training mean")
        mu_tn = mean_tensor(by_split[Split.TRAIN])
        series_by_split = {
            split: distances_to_mean(by_split[split], mu_tn, split, feature.value)
            for split in Split
            if by_split[split]
        }
        tag = feature.value
    boxes = {}
    for split, series in sorted(series_by_split.items(), key=lambda kv: kv[0].value):
        boxes[split.value] = box_stats(series).to_dict()
        hist = histogram(series, binning)
        atomic_write_text(
            out / f"hist_{tag}_{split.value}.csv",
            _csv_text(["bin_left", "bin_right", "count", "split"], histogram_rows(hist)),
        )
    atomic_write_text(out / f"box_{tag}.json", _json_text(boxes))
    return 0


def cmd_metrics(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        parse_manifest(fh.read())  # validates the manifest is well-formed
    with open(args.labels, "r", encoding="utf-8") as fh:
        labels = parse_labels(fh.read())
    label_index = {(l.video_id, l.frame_index): l.label for l in labels}
    polarity = ScorePolarity(args.polarity)
    with open(args.scores, "r", encoding="utf-8") as fh:
        samples = parse_scores(fh.read(), polarity, label_index)
    if args.per_video_average:
        report, skipped = metrics_report_per_video(samples)
        if skipped:
            logging.getLogger(__name__).warning("skipped single-class videos: %s", skipped)
    else:
        report = metrics_report(samples)
    out = Path(args.out)
    atomic_write_text(out / "metrics.json", _json_text(report.to_dict()))
    atomic_write_text(
        out / "roc.csv",
        _csv_text(["threshold", "fpr", "tpr"], [(p.threshold, p.x, p.y) for p in roc_curve(samples)]),
    )
    atomic_write_text(
        out / "pr.csv",
        _csv_text(
            ["threshold", "recall", "precision"], [(p.threshold, p.x, p.y) for p in pr_curve(samples)]
        ),
    )
    return 0


def parse_anomaly_mode(text: str):
    kind, _, value = text.partition(":")
    try:
        if kind == "traj-shift":
            return TrajectoryShift(float(value))
        if kind == "pose-deform":
            return PoseDeform(float(value))
        if kind == "group-converge":
            return GroupConverge(float(value))
    except ValueError:
        pass
    raise DataError(
        f"invalid anomaly mode {text!r}; expected traj-shift:<px>, "
        "pose-deform:<amp> or group-converge:<rate>"
    )


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_train_videos=args.videos,
        n_val_videos=args.val_videos,
        frames_per_video=args.frames,
        persons_per_video=args.persons,
        k=args.keypoints,
        frame_width=args.width,
        frame_height=args.height,
        drift_speed=args.drift,
        jitter_std=args.jitter,
        spawn_radius=args.spawn_radius,
        anomaly_modes=tuple(parse_anomaly_mode(m) for m in args.anomaly_mode),
        anomaly_fraction=args.anomaly_fraction,
        seed=args.seed,
        T=args.t,
        stride=args.stride,
        N=args.nodes,
    )
    bundle = generate(spec)
    out = Path(args.out)
    atomic_write_text(out / "tracklets.txt", serialize_tracklets(bundle.tracklets))
    atomic_write_text(out / "labels.csv", serialize_labels(bundle.labels))
    atomic_write_text(out / "manifest.json", serialize_manifest(bundle.videos))
    atomic_write_text(out / "synth_spec.json", _json_text(spec.to_dict()))
    for mode in args.oracle:
        rows = oracle_scores(bundle, mode, seed=args.seed)
        atomic_write_text(out / f"scores_{mode}.csv", serialize_scores(rows))
    return 0


def cmd_report(args) -> int:
    report = difficulty_report(
        _load_bundle(args),
        feature_types=tuple(FeatureType),
        center=_center_policy(args),
        binning=parse_binning(args.binning),
        truncate_social=args.truncate_social,
    )
    out = Path(args.out)
    atomic_write_text(out / "report.json", _json_text(report))
    for feature_value, entry in report["features"].items():
        for split_value, hist in entry.get("histograms", {}).items():
            rows = [
                (hist["bin_edges"][i], hist["bin_edges"][i + 1], hist["counts"][i], split_value)
                for i in range(len(hist["counts"]))
            ]
            atomic_write_text(
                out / f"hist_{feature_value}_{split_value}.csv",
                _csv_text(["bin_left", "bin_right", "count", "split"], rows),
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skelstat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--t", type=int, default=24, help="frames per window")
        p.add_argument("--stride", type=int, default=6)
        p.add_argument("--nodes", type=int, default=35, help="social node capacity N")
        p.add_argument("--keypoints", type=int, default=17, help="keypoints per pose")
        p.add_argument("--width", type=float, default=856.0, help="default frame width")
        p.add_argument("--height", type=float, default=480.0, help="default frame height")
        if data:
            p.add_argument("--tracklets", required=True)
            p.add_argument("--labels", required=True)
            p.add_argument("--manifest", required=True)
            p.add_argument("--no-center", action="store_true")
            p.add_argument("--truncate-social", action="store_true")
            p.add_argument("--feature", choices=sorted(_FEATURES), default=None)

    p = sub.add_parser("validate", help="cross-check tracklets, labels and manifest")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("windows", help="build and export feature windows")
    add_common(p)
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("sdom", help="S-DoM report for one feature type")
    add_common(p)
    p.set_defaults(func=cmd_sdom)

    p = sub.add_parser("dist-hist", help="distance histograms and box statistics")
    add_common(p)
    p.add_argument("--binning", default="auto", help="auto | count:<n> | width:<w>")
    p.add_argument("--embeddings", default=None, help="latent mode: embedding file")
    p.set_defaults(func=cmd_disthist)

    p = sub.add_parser("metrics", help="AUC-ROC, AUC-PR and EER of a score file")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--polarity", choices=[p.value for p in ScorePolarity], default="anomaly")
    p.add_argument("--per-video-average", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    add_common(p, data=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=3, help="training videos")
    p.add_argument("--val-videos", type=int, default=3)
    p.add_argument("--frames", type=int, default=240)
    p.add_argument("--persons", type=int, default=3)
    p.add_argument("--drift", type=float, default=1.0, help="max drift speed px/frame")
    p.add_argument("--jitter", type=float, default=1.0, help="joint jitter std px")
    p.add_argument("--spawn-radius", type=float, default=None)
    p.add_argument("--anomaly-mode", action="append", default=[],
                   help="traj-shift:<px> | pose-deform:<amp> | group-converge:<rate>")
    p.add_argument("--anomaly-fraction", type=float, default=0.0)
    p.add_argument("--oracle", action="append", default=[],
                   choices=["perfect", "random", "distance"],
                   help="also emit oracle score files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="consolidated difficulty report")
    add_common(p)
    p.add_argument("--binning", default="auto")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("SKELSTAT_LOG", "WARNING"))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SkelstatError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
