"""Figures for sweep CSVs, rendered to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = ("R1@0.5", "R1@0.7", "mAP@0.5", "mAP@0.75")

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # stable bytes across runs
    "svg.hashsalt": "momentkit",
}


def _save(fig, path) -> None:
    # drop the version stamp so reruns write identical files
    metadata = {"Software": None} if str(path).endswith(".png") else None
    fig.savefig(path, metadata=metadata)


def _varying(rows, key) -> bool:
    return len({r[key] for r in rows}) > 1


def plot_audio_length(rows, path, metrics=METRICS):
    """Metrics against audio length; the best ``L`` per metric is circled."""
    rows = sorted(rows, key=lambda r: r["L"])
    xs = [r["L"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 2.4))
        for name in metrics:
            ys = [100 * r[name] for r in rows]
            line, = ax.plot(xs, ys, marker="s", label=name)
            best = max(range(len(ys)), key=ys.__getitem__)
            ax.plot(xs[best], ys[best], "o", ms=9, mfc="none", mec=line.get_color())
        ax.set_xlabel("audio length L")
        ax.set_ylabel("score (%)")
        ax.set_xticks(xs)
        ax.legend(frameon=False, ncol=2)
        _save(fig, path)
        plt.close(fig)
    return Path(path)


def plot_frames_keyframes(rows, path, metrics=("R1@0.5", "mAP@0.5")):
    """One panel per metric, one line per keyframe count, against frame count."""
    ks = sorted({r["k"] for r in rows})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 2.4), squeeze=False)
        for ax, name in zip(axes[0], metrics):
            best = max(rows, key=lambda r: r[name])
            for k in ks:
                sub = sorted((r for r in rows if r["k"] == k), key=lambda r: r["N"])
                ax.plot([r["N"] for r in sub], [100 * r[name] for r in sub], marker="o", label=f"k={k}")
            ax.plot(best["N"], 100 * best[name], "*", color="red", ms=10, zorder=5)
            ax.set_xlabel("frames N")
            ax.set_ylabel(f"{name} (%)")
            ax.set_xticks(sorted({r["N"] for r in rows}))
        axes[0][0].legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)
    return Path(path)


def plot_ratio(rows, path):
    """Mean compression ratio per grid point."""
    labels = [f"N{r['N']} k{r['k']} ρ{r['rho']:g}" for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.0, 0.35 * len(rows)), 2.4))
        ax.bar(range(len(rows)), [r["ratio"] for r in rows], color="0.4")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=90)
        ax.set_ylabel("S_v / (N·Q)")
        ax.set_ylim(0, 1.05)
        _save(fig, path)
        plt.close(fig)
    return Path(path)


def render_sweep_figures(rows, out_dir, fmt: str = "png") -> list[Path]:
    """Pick figures from the axes that vary in ``rows``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not rows:
        return []
    paths = []
    if _varying(rows, "L"):
        paths.append(plot_audio_length(rows, out / f"audio_length.{fmt}"))
    if _varying(rows, "N") or _varying(rows, "k"):
        paths.append(plot_frames_keyframes(rows, out / f"frames_keyframes.{fmt}"))
    paths.append(plot_ratio(rows, out / f"compression_ratio.{fmt}"))
    return paths
