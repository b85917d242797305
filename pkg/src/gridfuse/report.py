"""Figure rendering for CLI reports. Headless only."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_confusion_figure",
    "save_iou_figure",
    "save_split_figure",
    "save_depth_figure",
    "save_c2c_figure",
    "save_training_figure",
    "save_plan_figures",
]

_DPI = 140


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_confusion_figure(cm, path, class_names=None):
    k = cm.n_classes
    counts = cm.counts.astype(np.float64)
    row = counts.sum(axis=1, keepdims=True)
    norm = np.divide(counts, row, out=np.zeros_like(counts), where=row > 0)
    fig, ax = plt.subplots(figsize=(0.6 * k + 2.5, 0.6 * k + 2))
    im = ax.imshow(norm, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel("predicted")
    ax.set_ylabel("ground truth")
    ticks = class_names if class_names else [str(i) for i in range(k)]
    ax.set_xticks(range(k), ticks, rotation=90, fontsize=7)
    ax.set_yticks(range(k), ticks, fontsize=7)
    fig.colorbar(im, ax=ax, label="row share")
    ax.set_title("confusion (row-normalized)")
    _finish(fig, path)


def save_iou_figure(iou, mean_iou, path, class_names=None):
    k = len(iou)
    names = class_names if class_names else [str(i) for i in range(k)]
    vals = np.nan_to_num(np.asarray(iou), nan=0.0)
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * k + 2), 3.5))
    ax.bar(range(k), vals, color="#4878a8")
    ax.axhline(mean_iou, color="#c44e52", lw=1.2, ls="--",
               label=f"mean {mean_iou:.4f}")
    ax.set_xticks(range(k), names, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("IoU")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    _finish(fig, path)


def save_split_figure(table, path, class_names=None):
    k = table.n_classes
    names = class_names if class_names else [str(i) for i in range(k)]
    x = np.arange(k)
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * k + 2), 4))
    for off, subset, color in ((-width, "train", "#4878a8"),
                               (0.0, "val", "#ee854a"),
                               (width, "test", "#6acc64")):
        ax.bar(x + off, table.counts[subset], width, label=subset, color=color)
    ax.set_yscale("log")
    ax.set_xticks(x, names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("points")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    _finish(fig, path)


def save_depth_figure(depthmap, path):
    grid = depthmap.grid
    finite = np.isfinite(grid)
    fig, ax = plt.subplots(figsize=(6, 5))
    if finite.any():
        shown = np.where(finite, grid, np.nan)
        im = ax.imshow(shown, cmap="magma")
        fig.colorbar(im, ax=ax, label="depth [m]")
    else:
        ax.text(0.5, 0.5, "empty depth map", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_title(f"depth map ({int(finite.sum())} filled cells)")
    _finish(fig, path)


def save_c2c_figure(dists, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(dists):
        ax.hist(dists, bins=min(80, max(10, len(dists) // 20)),
                color="#4878a8", edgecolor="none")
    ax.set_xlabel("nearest-neighbor distance [m]")
    ax.set_ylabel("points")
    ax.grid(alpha=0.3)
    _finish(fig, path)


def save_training_figure(history, path):
    loss = [h["loss"] for h in history]
    acc = [h["accuracy"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(loss, color="#4878a8", label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(acc, color="#c44e52", label="accuracy")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def save_plan_figures(plan, pylons, top_path, profile_path):
    pos = plan.positions()
    speeds = plan.speeds()
    px = [p.x for p in pylons]
    py = [p.y for p in pylons]

    fig, ax = plt.subplots(figsize=(7, 5))
    sc = ax.scatter(pos[:, 0], pos[:, 1], c=speeds, cmap="coolwarm_r", s=14,
                    zorder=3)
    ax.plot(pos[:, 0], pos[:, 1], color="#999999", lw=0.7, zorder=2)
    ax.plot(px, py, "k^-", ms=9, lw=1.0, label="pylons", zorder=4)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.colorbar(sc, ax=ax, label="speed [m/s]")
    ax.legend()
    _finish(fig, top_path)

    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    ax1.plot(arc, pos[:, 2], color="#4878a8")
    ax1.set_ylabel("z [m]")
    ax1.grid(alpha=0.3)
    ax2.plot(arc, speeds, color="#c44e52", drawstyle="steps-post")
    ax2.set_ylabel("speed [m/s]")
    ax2.set_xlabel("arc length [m]")
    ax2.grid(alpha=0.3)
    _finish(fig, profile_path)
