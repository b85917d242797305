"""Command-line front end.

Every subcommand writes its data products plus a manifest.json recording
parameters and sha256 digests of the inputs, and is deterministic for a
fixed seed/thread count.  Exit codes: 0 ok, 2 usage, 3 bad input data,
4 internal failure.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__
from .cameras import load_cameras
from .depth import render_depth_map, save_depth_npy, load_depth_npy
from .errors import DataError, GridFuseError, ValidationError
from .flight import FlightPlanConfig, plan_trajectory, read_pylons, write_plan
from .fusion import TrainConfig, load_model, save_model, train_fusion
from .manifest import write_manifest
from .metrics import confusion, miou, split_statistics, format_split_table, cloud_to_cloud
from .ply import read_ply
from .submission import (
    load_zone_assignment, default_zone_assignment, zones_for_subset,
    read_submission, write_submission,
)
from .transfer import (
    TransferConfig, ViewWeighting, WeightMode,
    default_class_mapping, load_class_mapping, remap_labels, transfer_labels,
)

USAGE_EXIT = 2
DATA_EXIT = 3
INTERNAL_EXIT = 4

# display names for the 11-class grouping, indexed by training id
TRAINING_CLASS_NAMES = (
    "Pylon", "Conductor cable", "Structural cable", "Insulator",
    "High vegetation", "Low vegetation", "Herbaceous vegetation",
    "Rock, gravel, soil", "Impervious soil (Road)", "Water", "Building",
)


def _default_threads():
    env = os.environ.get("GRIDFUSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _load_cloud(path):
    """Point positions from .ply or .npy."""
    if str(path).endswith(".ply"):
        return read_ply(path).positions
    arr = np.load(path)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DataError(f"{path}: expected an (N, 3) array, got {arr.shape}")
    return np.asarray(arr, dtype=np.float64)


def _camera_by_image(cameras, image, path):
    for cam in cameras:
        if cam.image == image:
            return cam
    raise DataError(f"{path}: no camera record for image '{image}'")


def _load_logits(directory, cameras):
    out = []
    for cam in cameras:
        p = os.path.join(directory, cam.image + ".npy")
        if not os.path.exists(p):
            raise DataError(f"{directory}: missing logit image '{cam.image}.npy'")
        arr = np.load(p)
        if arr.ndim != 3:
            raise DataError(f"{p}: expected (H, W, K) logits, got {arr.shape}")
        out.append(arr)
    return out


def _load_zone_labels(directory):
    files = sorted(f for f in os.listdir(directory) if f.endswith(".npy"))
    if not files:
        raise DataError(f"{directory}: no .npy label files")
    out = {}
    for f in files:
        arr = np.load(os.path.join(directory, f))
        out[f[:-4]] = arr
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _class_names(k):
    return list(TRAINING_CLASS_NAMES) if k == len(TRAINING_CLASS_NAMES) else [str(i) for i in range(k)]


# ---------------------------------------------------------------------------
# subcommands

def cmd_project(args):
    cameras = load_cameras(args.cameras)
    cam = _camera_by_image(cameras, args.camera, args.cameras)
    pts = _load_cloud(args.points)
    from .geometry import project_batch
    f_x, f_y, z, status = project_batch(cam.intrinsics, cam.pose, pts)
    os.makedirs(args.out, exist_ok=True)
    out = np.column_stack([f_x, f_y, z, status.astype(np.float64)])
    np.save(os.path.join(args.out, "projections.npy"), out)
    write_manifest(args.out, "project",
                   {"camera": args.camera}, [args.cameras, args.points])
    in_frame = int((status == 0).sum())
    print(f"projected {len(pts)} points, {in_frame} in frame")
    return 0


def cmd_depthmap(args):
    cameras = load_cameras(args.cameras)
    if args.camera:
        cameras = [_camera_by_image(cameras, args.camera, args.cameras)]
    pts = _load_cloud(args.cloud)
    os.makedirs(args.out, exist_ok=True)
    from .report import save_depth_figure
    for cam in cameras:
        dm = render_depth_map(cam.intrinsics, cam.pose, pts,
                              buffer_radius=args.buffer, threads=args.threads)
        save_depth_npy(dm, os.path.join(args.out, cam.image + ".npy"))
        if args.figures:
            save_depth_figure(dm, os.path.join(args.out, cam.image + ".png"))
        filled = int(np.isfinite(dm.grid).sum())
        print(f"{cam.image}: {filled} of {dm.grid.size} cells filled")
    write_manifest(args.out, "depthmap",
                   {"buffer_radius": args.buffer, "camera": args.camera},
                   [args.cameras, args.cloud])
    return 0


def cmd_transfer(args):
    cameras = load_cameras(args.cameras)
    pts = _load_cloud(args.cloud)
    logits = _load_logits(args.logits, cameras)
    if args.weighting == "invdist":
        weighting = ViewWeighting(WeightMode.INVERSE_DISTANCE)
    else:
        weighting = ViewWeighting(WeightMode.UNIFORM)
    cfg = TransferConfig(tau_z=args.tau, weighting=weighting,
                         bilinear=args.bilinear)
    if args.depthmaps:
        dms = [load_depth_npy(os.path.join(args.depthmaps, cam.image + ".npy"),
                              buffer_radius=args.buffer)
               for cam in cameras]
    else:
        dms = [render_depth_map(cam.intrinsics, cam.pose, pts,
                                buffer_radius=args.buffer, threads=args.threads)
               for cam in cameras]
    labels = transfer_labels(pts, cameras, dms, logits, cfg, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    np.save(os.path.join(args.out, "labels.npy"), labels)
    inputs = [args.cameras, args.cloud, args.logits]
    if args.depthmaps:
        inputs.append(args.depthmaps)
    write_manifest(args.out, "transfer",
                   {"tau_z": args.tau, "buffer_radius": args.buffer,
                    "weighting": args.weighting, "bilinear": args.bilinear},
                   inputs)
    n_ignore = int((labels == 255).sum())
    print(f"labeled {len(labels) - n_ignore} of {len(labels)} points "
          f"({n_ignore} without evidence)")
    return 0


def cmd_fuse_train(args):
    a = np.load(args.image_logits)
    b = np.load(args.point_logits)
    y = np.load(args.labels)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                      batch_size=args.batch, seed=args.seed,
                      momentum=args.momentum, hidden=hidden,
                      class_weighting=args.class_weighting)
    model, history = train_fusion(a, b, y, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_model(model, os.path.join(args.out, "model.bin"))
    _write_csv(os.path.join(args.out, "training_log.csv"),
               ["epoch", "loss", "accuracy"],
               [[i, f"{h['loss']:.8f}", f"{h['accuracy']:.6f}"]
                for i, h in enumerate(history)])
    from .report import save_training_figure
    save_training_figure(history, os.path.join(args.out, "training_curve.png"))
    write_manifest(args.out, "fuse-train",
                   {"lr": args.lr, "epochs": args.epochs, "batch": args.batch,
                    "seed": args.seed, "momentum": args.momentum,
                    "hidden": list(hidden),
                    "class_weighting": args.class_weighting},
                   [args.image_logits, args.point_logits, args.labels])
    print(f"trained {model.num_params}-parameter head, "
          f"final accuracy {history[-1]['accuracy']:.4f}")
    return 0


def cmd_fuse_predict(args):
    model = load_model(args.model)
    a = np.asarray(np.load(args.image_logits), dtype=np.float64)
    b = np.asarray(np.load(args.point_logits), dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise DataError(
            f"branch shapes differ or are not (N, K): {a.shape} vs {b.shape}"
        )
    scores = model.forward(np.concatenate([a, b], axis=1))
    labels = np.argmax(scores, axis=1).astype(np.uint8)
    os.makedirs(args.out, exist_ok=True)
    np.save(os.path.join(args.out, "labels.npy"), labels)
    write_manifest(args.out, "fuse-predict", {},
                   [args.model, args.image_logits, args.point_logits])
    print(f"predicted {len(labels)} labels")
    return 0


def _load_eval_side(path, what):
    if os.path.isdir(path):
        return _load_zone_labels(path)
    if path.endswith(".npz") or path.endswith(".zip"):
        return read_submission(path)
    arr = np.load(path)
    if arr.ndim != 1:
        raise DataError(f"{path}: {what} labels must be 1-D, got {arr.shape}")
    return {"": arr.astype(np.uint8)}


def cmd_eval(args):
    pred = _load_eval_side(args.pred, "predicted")
    gt = _load_eval_side(args.gt, "ground-truth")
    missing = sorted(set(gt) - set(pred))
    if missing:
        raise ValidationError(f"predictions missing zones: {', '.join(missing)}")
    k = args.classes
    cm = None
    for zone in sorted(gt):
        if len(pred[zone]) != len(gt[zone]):
            raise ValidationError(
                f"zone '{zone or args.pred}': {len(pred[zone])} predictions "
                f"for {len(gt[zone])} ground-truth points"
            )
        part = confusion(pred[zone], gt[zone], k)
        cm = part if cm is None else cm.merge(part)
    iou, mean_iou = miou(cm)
    names = _class_names(k)
    width = max(len(n) for n in names)
    for c in range(k):
        val = "  (absent)" if np.isnan(iou[c]) else f"{iou[c]:10.4f}"
        print(f"{names[c]:<{width}} {val}")
    print(f"{'mIoU':<{width}} {mean_iou:10.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(os.path.join(args.out, "per_class_iou.csv"),
                   ["class_id", "class_name", "iou"],
                   [[c, names[c], "" if np.isnan(iou[c]) else f"{iou[c]:.6f}"]
                    for c in range(k)] + [["", "mIoU", f"{mean_iou:.6f}"]])
        _write_csv(os.path.join(args.out, "confusion.csv"),
                   ["gt\\pred"] + names + ["abstain"],
                   [[names[g]] + [int(v) for v in cm.counts[g]] + [int(cm.abstain[g])]
                    for g in range(k)])
        from .report import save_confusion_figure, save_iou_figure
        save_confusion_figure(cm, os.path.join(args.out, "confusion.png"), names)
        save_iou_figure(iou, mean_iou, os.path.join(args.out, "iou.png"), names)
        write_manifest(args.out, "eval", {"classes": k},
                       [args.pred, args.gt])
    return 0


def _counts_from_csv(path, k):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["zone", "class", "count"]:
            raise DataError(f"{path}: expected 'zone,class,count' header")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) < 3:
                raise DataError(f"{path}: short row {row!r}")
            zone = row[0].strip()
            try:
                cls = int(row[1])
                count = int(row[2])
            except ValueError as exc:
                raise DataError(f"{path}: bad row {row!r}") from exc
            if not (0 <= cls < k):
                raise DataError(f"{path}: class {cls} outside [0, {k})")
            vec = out.setdefault(zone, np.zeros(k, dtype=np.int64))
            vec[cls] += count
    if not out:
        raise DataError(f"{path}: no counts found")
    return out


def cmd_stats(args):
    assignment = load_zone_assignment(args.splits) if args.splits else default_zone_assignment()
    k = args.classes
    if args.counts:
        zone_counts = _counts_from_csv(args.counts, k)
    else:
        labels = _load_zone_labels(args.labels)
        zone_counts = {}
        for zone, arr in labels.items():
            arr = arr[arr != 255]
            if arr.size and (arr.min() < 0 or arr.max() >= k):
                raise DataError(f"zone '{zone}': label outside [0, {k})")
            zone_counts[zone] = np.bincount(arr, minlength=k)[:k].astype(np.int64)
    table = split_statistics(zone_counts, assignment, n_classes=k)
    names = _class_names(k)
    print(format_split_table(table, names))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        pct = table.pct_of_total("test")
        _write_csv(os.path.join(args.out, "split_stats.csv"),
                   ["class_id", "class_name", "train", "val", "test", "total",
                    "test_pct_of_total"],
                   [[c, names[c], int(table.counts["train"][c]),
                     int(table.counts["val"][c]), int(table.counts["test"][c]),
                     int(table.class_total()[c]),
                     "" if np.isnan(pct[c]) else f"{pct[c]:.1f}"]
                    for c in range(k)])
        from .report import save_split_figure
        save_split_figure(table, os.path.join(args.out, "split_distribution.png"), names)
        inputs = [args.splits] if args.splits else []
        inputs.append(args.counts if args.counts else args.labels)
        write_manifest(args.out, "stats", {"classes": k}, inputs)
    return 0


def cmd_submit(args):
    labels = _load_zone_labels(args.labels)
    assignment = load_zone_assignment(args.zones) if args.zones else default_zone_assignment()
    expected = zones_for_subset(assignment, args.subset)
    for zone, arr in labels.items():
        if arr.dtype != np.uint8:
            raise ValidationError(f"zone '{zone}': labels must be uint8, got {arr.dtype}")
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    write_submission(labels, args.out, n_classes=args.classes,
                     expected_zones=expected)
    write_manifest(out_dir, "submit",
                   {"subset": args.subset, "classes": args.classes,
                    "archive": os.path.basename(args.out)},
                   [args.labels] + ([args.zones] if args.zones else []))
    total = sum(len(v) for v in labels.values())
    print(f"wrote {args.out}: {len(labels)} zones, {total} labels")
    return 0


def cmd_c2c(args):
    a = _load_cloud(args.cloud_a)
    b = _load_cloud(args.cloud_b)
    dists, summary = cloud_to_cloud(a, b, workers=args.threads)
    os.makedirs(args.out, exist_ok=True)
    np.save(os.path.join(args.out, "distances.npy"), dists)
    _write_csv(os.path.join(args.out, "c2c_summary.csv"),
               ["statistic", "meters"],
               [[kk, f"{v:.9f}"] for kk, v in summary.items()])
    from .report import save_c2c_figure
    save_c2c_figure(dists, os.path.join(args.out, "c2c_hist.png"))
    write_manifest(args.out, "c2c", {}, [args.cloud_a, args.cloud_b])
    for kk in ("median", "p90", "max"):
        if kk in summary:
            print(f"{kk}: {summary[kk]:.4f} m")
    return 0


def cmd_plan(args):
    pylons = read_pylons(args.pylons)
    import math
    cfg = FlightPlanConfig(
        height=args.height, depression=math.radians(args.angle),
        lateral_offset=args.lateral, spacing=args.spacing,
        v_min=args.vmin, v_max=args.vmax, accel=args.accel,
    )
    plan = plan_trajectory(pylons, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_plan(plan, os.path.join(args.out, "waypoints.txt"))
    from .report import save_plan_figures
    save_plan_figures(plan, pylons,
                      os.path.join(args.out, "plan_top.png"),
                      os.path.join(args.out, "plan_profile.png"))
    write_manifest(args.out, "plan",
                   {"height": args.height, "angle_deg": args.angle,
                    "lateral": args.lateral, "spacing": args.spacing,
                    "v_min": args.vmin, "v_max": args.vmax,
                    "accel": args.accel},
                   [args.pylons])
    pos = plan.positions()
    length = float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))
    sp = plan.speeds()
    print(f"{len(plan)} waypoints, {length:.0f} m, "
          f"speeds {sp.min():.1f}-{sp.max():.1f} m/s")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridfuse",
        description="Camera-to-cloud label transfer, fusion, evaluation, "
                    "and corridor flight planning.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker threads (default: GRIDFUSE_THREADS or CPU count)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=fn)
        return p

    p = add("project", cmd_project, "project a cloud into one camera")
    p.add_argument("--cameras", required=True, help="camera JSON file")
    p.add_argument("--camera", required=True, help="image id to project into")
    p.add_argument("--points", required=True, help="cloud (.ply or .npy)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("depthmap", cmd_depthmap, "render min-depth maps")
    p.add_argument("--cameras", required=True, help="camera JSON file")
    p.add_argument("--camera", default=None,
                   help="single image id (default: every camera)")
    p.add_argument("--cloud", required=True, help="cloud (.ply or .npy)")
    p.add_argument("--buffer", type=int, default=2, help="buffer radius, px")
    p.add_argument("--figures", action="store_true", help="also write previews")
    p.add_argument("--out", required=True, help="output directory")

    p = add("transfer", cmd_transfer, "vote per-pixel logits onto points")
    p.add_argument("--cameras", required=True, help="camera JSON file")
    p.add_argument("--cloud", required=True, help="cloud (.ply or .npy)")
    p.add_argument("--logits", required=True,
                   help="directory of <image>.npy (H, W, K) logit arrays")
    p.add_argument("--depthmaps", default=None,
                   help="reuse depth maps from this directory")
    p.add_argument("--tau", type=float, default=0.15,
                   help="depth consistency tolerance, m")
    p.add_argument("--buffer", type=int, default=2, help="buffer radius, px")
    p.add_argument("--weighting", choices=["uniform", "invdist"],
                   default="uniform", help="view weighting")
    p.add_argument("--bilinear", action="store_true",
                   help="bilinear logit sampling (default nearest)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("fuse-train", cmd_fuse_train, "train the late-fusion head")
    p.add_argument("--image-logits", required=True, help="(N, K) .npy")
    p.add_argument("--point-logits", required=True, help="(N, K) .npy")
    p.add_argument("--labels", required=True, help="(N,) .npy, 255 = ignore")
    p.add_argument("--lr", type=float, default=0.05, help="learning rate")
    p.add_argument("--epochs", type=int, default=100, help="epochs")
    p.add_argument("--batch", type=int, default=64, help="minibatch size")
    p.add_argument("--seed", type=int, default=0, help="rng seed")
    p.add_argument("--momentum", type=float, default=0.0, help="momentum")
    p.add_argument("--hidden", default="256,256", help="hidden widths")
    p.add_argument("--class-weighting", action="store_true",
                   help="reweight samples by inverse class frequency")
    p.add_argument("--out", required=True, help="output directory")

    p = add("fuse-predict", cmd_fuse_predict, "apply a trained fusion head")
    p.add_argument("--model", required=True, help="checkpoint from fuse-train")
    p.add_argument("--image-logits", required=True, help="(N, K) .npy")
    p.add_argument("--point-logits", required=True, help="(N, K) .npy")
    p.add_argument("--out", required=True, help="output directory")

    p = add("eval", cmd_eval, "per-class IoU and mIoU")
    p.add_argument("--pred", required=True,
                   help="predictions: archive, .npy, or directory")
    p.add_argument("--gt", required=True,
                   help="ground truth: archive, .npy, or directory")
    p.add_argument("--classes", type=int, default=11, help="class count")
    p.add_argument("--out", default=None, help="optional report directory")

    p = add("stats", cmd_stats, "split statistics from labels or counts")
    p.add_argument("--splits", default=None,
                   help="zone assignment table (default: built-in)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--labels", help="directory of <zone>.npy labels")
    g.add_argument("--counts", help="CSV of zone,class,count")
    p.add_argument("--classes", type=int, default=11, help="class count")
    p.add_argument("--out", default=None, help="optional report directory")

    p = add("submit", cmd_submit, "bundle per-zone labels into an archive")
    p.add_argument("--labels", required=True,
                   help="directory of <zone>.npy uint8 labels")
    p.add_argument("--zones", default=None,
                   help="zone assignment table (default: built-in)")
    p.add_argument("--subset", default="test", choices=["train", "val", "test"],
                   help="subset whose zones the archive must cover")
    p.add_argument("--classes", type=int, default=11, help="class count")
    p.add_argument("--out", required=True, help="archive path (.npz)")

    p = add("c2c", cmd_c2c, "nearest-neighbor distances between clouds")
    p.add_argument("--cloud-a", required=True, help="query cloud (.ply/.npy)")
    p.add_argument("--cloud-b", required=True, help="reference cloud (.ply/.npy)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("plan", cmd_plan, "corridor flight plan over pylons")
    p.add_argument("--pylons", required=True, help="table of id x y z_top")
    p.add_argument("--height", type=float, default=25.0,
                   help="clearance above the line, m")
    p.add_argument("--angle", type=float, default=50.0,
                   help="sensor depression angle, degrees")
    p.add_argument("--lateral", type=float, default=5.0,
                   help="lateral offset, m")
    p.add_argument("--spacing", type=float, default=10.0,
                   help="waypoint spacing, m")
    p.add_argument("--vmin", type=float, default=2.0, help="min speed, m/s")
    p.add_argument("--vmax", type=float, default=10.0, help="max speed, m/s")
    p.add_argument("--accel", type=float, default=0.5,
                   help="allowed speed change per meter")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ValidationError, GridFuseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except KeyboardInterrupt:
        return 130
    except Exception as exc:          # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
