"""Figure rendering for experiment reports. Files only; never opens a window."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.4),
    "savefig.dpi": 150,
}
_COLORS = {"e": "tab:gray", "f": "tab:orange", "g": "tab:blue", "h": "black"}
# Deterministic PNGs: no timestamp or software tag in the metadata.
_META = {"Software": None}


def plot_fringe(result, path, detectors=("g", "h")):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        phis = np.asarray(result.phis)
        dense = np.linspace(phis.min(), phis.max(), 400)
        for d in detectors:
            rates = np.asarray(result.rates[d]) * 1e9  # counts per second
            ax.plot(phis, rates, "o", ms=3, color=_COLORS.get(d), label=f"{d}")
            fit = (result.fits or {}).get(d)
            if fit is not None:
                model = fit.offset + fit.amplitude * np.cos(dense - fit.phase_origin)
                ax.plot(dense, model * 1e9, "-", lw=1, color=_COLORS.get(d),
                        label=f"{d} fit, V = {fit.visibility:.3f}")
        ax.set_xlabel(r"phase $\phi$ (rad)")
        ax.set_ylabel("count rate (1/s)")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata=_META)
        plt.close(fig)


def plot_g2(run, path):
    hist = run.histogram
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.step(hist.centers, hist.normalized, where="mid", lw=0.8, color="tab:blue",
                label=f"{run.pair[0]}/{run.pair[1]} simulated")
        if run.oracle is not None:
            ax.plot(hist.centers, run.oracle, "-", lw=1.2, color="tab:red", label="jitter-blurred model")
        ax.axhline(0.5, ls=":", lw=0.8, color="gray")
        ax.set_xlabel(r"delay $\tau$ (ns)")
        ax.set_ylabel(r"$g^{(2)}(\tau)$")
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path, metadata=_META)
        plt.close(fig)
