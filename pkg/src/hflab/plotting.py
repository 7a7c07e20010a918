import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.0, 3.6),
    "savefig.dpi": 120,
}


def _floor(values):
    # log axes cannot show exact zeros
    return np.maximum(np.asarray(values, dtype=float), 1e-18)


def plot_traces(traces, path, title=None):
    """sup norms of H and R against time for each integrated form."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for form, trace in sorted(traces.items()):
            ls = "-" if form == "gauge" else "--"
            ax.semilogy(trace.times, _floor(trace.sup_H), ls, color="C0", label=f"sup |H| ({form})")
            ax.semilogy(trace.times, _floor(trace.sup_R), ls, color="C1", label=f"sup |R| ({form})")
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_sweep(rows, path):
    """Final sup |R| per run, coloured by outcome."""
    colours = {"converged": "C2", "not_converged": "C1"}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"{r['side']} k={r['twist']} eps={r['eps']}" for r in rows]
        vals = [float(r["sup_R_final"]) if r["sup_R_final"] not in ("", None) else np.nan for r in rows]
        ax.bar(range(len(rows)), _floor(vals), color=[colours.get(r["outcome"], "C3") for r in rows])
        ax.set_yscale("log")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=60, ha="right")
        ax.set_ylabel("final sup |R|")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
