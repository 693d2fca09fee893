"""Figure rendering for sweep results and jammer footprints.

Figures are written to files next to the delimited output; nothing here is
interactive.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (5.2, 3.6),
    "figure.dpi": 120,
    "savefig.dpi": 200,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linestyle": "--",
    "lines.linewidth": 1.2,
    "lines.markersize": 5,
    "legend.fontsize": 8,
    "font.size": 9,
}


def save_ber_figure(records, path) -> str:
    """BER of the jammed group vs Eb/N0 (or vs JNR for a single-Eb sweep),
    one curve per (JNR, hop) combination."""
    plt.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    ebs = sorted({r.eb_n0_db for r in records})
    jnrs = sorted({r.jnr_db for r in records})
    single_eb = len(ebs) == 1 and len(jnrs) > 1

    def curve(points, label, style):
        points = sorted(points, key=lambda p: p[0])
        if points:
            ax.semilogy([p[0] for p in points],
                        [max(p[1], 1e-7) for p in points],
                        style, label=label)

    for hop_on, style in ((False, "o--"), (True, "s-")):
        hop_label = "hop" if hop_on else "static"
        if single_eb:
            pts = [(r.jnr_db, r.ber_jammed) for r in records if r.hop == hop_on]
            curve(pts, hop_label, style)
        else:
            for jnr in jnrs:
                pts = [(r.eb_n0_db, r.ber_jammed) for r in records
                       if r.hop == hop_on and r.jnr_db == jnr]
                curve(pts, f"{hop_label}, JNR {jnr:g} dB", style)

    ax.set_xlabel("JNR (dB)" if single_eb else "Eb/N0 (dB)")
    ax.set_ylabel("BER of jammed group")
    if records:
        ax.set_title(f"{records[0].jammer.upper()} on {records[0].axis} partition")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def save_footprint_figure(dd_block: np.ndarray, path, title: str = "") -> str:
    """Heatmap of |W|^2 over the delay-Doppler grid."""
    plt.rcParams.update(_STYLE)
    power = np.abs(np.asarray(dd_block)) ** 2
    fig, ax = plt.subplots()
    im = ax.imshow(power, aspect="auto", origin="lower", cmap="viridis")
    ax.set_xlabel("Doppler bin")
    ax.set_ylabel("delay bin")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="power")
    fig.savefig(path)
    plt.close(fig)
    return str(path)
