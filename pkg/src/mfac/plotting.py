"""Optional SVG line plots of simulation traces.

Plotting is a convenience on top of the CSV contract; matplotlib is only
imported when a plot is actually requested.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["write_svg_plots"]


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg", force=True)
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError(
            "SVG plotting requires matplotlib (install the 'plot' extra)") from exc
    return plt


def write_svg_plots(trace, out_dir, tag: str = "") -> list[Path]:
    """Render tracking, input and PJM-entry plots as standalone SVG files."""
    plt = _pyplot()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = trace.dims.m
    written = []

    fig, axes = plt.subplots(m, 1, figsize=(8, 2.2 * m), sharex=True, squeeze=False)
    for j in range(m):
        ax = axes[j, 0]
        ax.plot(trace.steps, trace.y_ref[:, j], "k--", lw=1, label="reference")
        ax.plot(trace.steps, trace.y[:, j], lw=1, label="output")
        ax.set_ylabel(f"y{j + 1}")
        ax.legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("step")
    fig.tight_layout()
    path = out_dir / f"tracking{tag}.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 2.8))
    for j in range(m):
        ax.plot(trace.steps, trace.u[:, j], lw=1, label=f"u{j + 1}")
    ax.set_xlabel("step")
    ax.set_ylabel("input")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = out_dir / f"inputs{tag}.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 2.8))
    flat = trace.phi.reshape(trace.n_steps, -1)
    for col in range(flat.shape[1]):
        ax.plot(trace.steps, flat[:, col], lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("PJM entries")
    fig.tight_layout()
    path = out_dir / f"pjm{tag}.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written
