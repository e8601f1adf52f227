"""Preview figures and summary tables for supervision bundles."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .bundle import LoadedBundle
from .formats import atomic_write, mask_to_pgm, preview_to_pgm

STATS_HEADER = ("map", "min", "max", "mean", "support_fraction")


def bundle_panels(bundle: LoadedBundle) -> list[tuple[str, np.ndarray]]:
    panels = [
        ("vam", bundle.vam),
        ("vam_refined", bundle.vam_refined),
        ("hard_mask", bundle.hard_mask.astype(np.float64)),
    ]
    for r in sorted(bundle.track_maps):
        panels.append((f"track_{round(r * 100):03d}", bundle.track_maps[r]))
    return panels


def map_stats(bundle: LoadedBundle) -> list[tuple]:
    rows = []
    for name, values in bundle_panels(bundle):
        rows.append((name, float(values.min()), float(values.max()), float(values.mean()),
                     float(np.count_nonzero(values) / values.size)))
    return rows


def format_stats(rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for name, *vals in rows:
        writer.writerow([name, *(f"{v:.6g}" for v in vals)])
    return out.getvalue()


def plot_bundle(bundle: LoadedBundle, image=None, track=None):
    """Figure with one panel per map, plus the image with the track on top."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = bundle_panels(bundle)
    n = len(panels) + (1 if image is not None else 0)
    cols = min(4, n)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.0 * cols, 3.0 * rows), squeeze=False)
    flat = list(axes.ravel())
    if image is not None:
        ax = flat.pop(0)
        img = np.asarray(image)
        ax.imshow(img[..., 0] if img.ndim == 3 and img.shape[-1] == 1 else img,
                  cmap="gray", vmin=0.0, vmax=1.0)
        if track is not None and len(track):
            v = track.vertices
            ax.plot(v[:, 0], v[:, 1], "-", color="tab:red", lw=0.8)
            ax.scatter(v[:, 0], v[:, 1], s=6, c=np.arange(len(v)), cmap="autumn", zorder=3)
        ax.set_title("image + track", fontsize=9)
    for ax, (name, values) in zip(flat, panels):
        im = ax.imshow(values, cmap="magma", vmin=0.0, vmax=1.0)
        ax.set_title(name, fontsize=9)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    for ax in axes.ravel():
        ax.set_xticks([])
        ax.set_yticks([])
    for ax in flat[len(panels):]:
        ax.axis("off")
    fig.suptitle(bundle.image_id, fontsize=10)
    fig.tight_layout()
    return fig


def render_bundle(bundle: LoadedBundle, out_dir, image=None, track=None, dpi: int = 110) -> dict[str, Path]:
    """Write the figure, 8-bit previews and a stats CSV into ``out_dir``."""
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    fig = plot_bundle(bundle, image=image, track=track)
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=dpi)
    plt.close(fig)
    written["figure"] = out / f"{bundle.image_id}_preview.png"
    atomic_write(written["figure"], buf.getvalue())
    for name, values in bundle_panels(bundle):
        path = out / f"{bundle.image_id}_{name}.pgm"
        data = mask_to_pgm(values > 0) if name == "hard_mask" else preview_to_pgm(values)
        atomic_write(path, data)
        written[name] = path
    written["stats"] = out / f"{bundle.image_id}_stats.csv"
    atomic_write(written["stats"], format_stats(map_stats(bundle)).encode("utf-8"))
    return written
