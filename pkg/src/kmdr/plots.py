"""Figure rendering for the band report path.

Renders the marginal-effect path with its pointwise (darker) and
simultaneous (lighter) bands to an image file, one panel per covariate.
File-only output; the Agg backend keeps this headless-safe.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .inference import AdmeBand  # noqa: E402


def render_band_figure(band: AdmeBand, out_path: str,
                       covariate_names: list[str] | None = None) -> None:
    p, k = band.adme.shape
    names = covariate_names or [f"x{c}" for c in range(k)]
    fig, axes = plt.subplots(k, 1, figsize=(7.0, 2.8 * k), sharex=True, squeeze=False)
    ts = band.grid.thresholds
    for c in range(k):
        ax = axes[c, 0]
        ax.fill_between(ts, band.simultaneous_lo[:, c], band.simultaneous_hi[:, c],
                        color="#9ecae1", alpha=0.6,
                        label=f"{100 * (1 - band.alpha):.0f}% simultaneous")
        ax.fill_between(ts, band.pointwise_lo[:, c], band.pointwise_hi[:, c],
                        color="#3182bd", alpha=0.45,
                        label=f"{100 * (1 - band.alpha):.0f}% pointwise")
        ax.plot(ts, band.adme[:, c], color="black", lw=1.4, label="estimate")
        ax.axhline(0.0, color="gray", lw=0.8, ls=":")
        ax.set_ylabel(f"effect of {names[c]}")
        if c == 0:
            ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("duration threshold")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
