"""Report figures written next to the CSV outputs (non-interactive backend)."""

import os
from typing import Dict, Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_trace", "plot_traces", "plot_sweep"]


def _finish(fig, path):
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(os.fspath(path), dpi=100, metadata={"Software": None})
    plt.close(fig)
    return os.fspath(path)


def plot_trace(trace, path, title=None) -> str:
    """Objective decomposition and Lipschitz estimates over the iterations."""
    it = trace.column("iter")
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    for name, style in (("objective", "k-"), ("data_fidelity", "C0--"),
                        ("reg_u", "C1--"), ("reg_k", "C2--")):
        values = np.clip(trace.column(name), 1e-300, None)
        ax0.semilogy(it, values, style, label=name)
    ax0.set_xlabel("iteration")
    ax0.set_ylabel("value")
    ax0.legend(loc="best", fontsize="small")
    ax0.set_title(title or trace.algorithm)
    lu, lk = trace.column("L_u"), trace.column("L_k")
    if np.all(np.isnan(lu)) and np.all(np.isnan(lk)):
        ax1.plot(it, trace.column("retries"), "C3-")
        ax1.set_ylabel("rejected block updates")
    else:
        ax1.semilogy(it, lu, "C0-", label="L_u")
        ax1.semilogy(it, lk, "C1-", label="L_k")
        ax1.set_ylabel("Lipschitz estimate")
        ax1.legend(loc="best", fontsize="small")
    ax1.set_xlabel("iteration")
    return _finish(fig, path)


def plot_traces(traces: Dict[str, object], path, title="objective") -> str:
    """Overlay the objective of several runs, e.g. an algorithm comparison."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, trace in traces.items():
        ax.semilogy(trace.column("iter"), trace.objective, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    return _finish(fig, path)


def plot_sweep(rows: Iterable[dict], path, metric: str = "ssim") -> str:
    """Heatmaps of ``metric`` over the (lambda_u, lambda_k) grid, one panel per gamma.

    Failed cells (missing or non-finite metric) are left blank.
    """
    rows = list(rows)
    gammas: Sequence[float] = sorted({float(r["gamma"]) for r in rows})
    lus = sorted({float(r["lambda_u"]) for r in rows})
    lks = sorted({float(r["lambda_k"]) for r in rows})
    fig, axes = plt.subplots(1, len(gammas), figsize=(4.5 * len(gammas), 4), squeeze=False)
    for ax, gamma in zip(axes[0], gammas):
        grid = np.full((len(lks), len(lus)), np.nan)
        for r in rows:
            if float(r["gamma"]) != gamma:
                continue
            try:
                value = float(r[metric])
            except (TypeError, ValueError):
                continue
            grid[lks.index(float(r["lambda_k"])), lus.index(float(r["lambda_u"]))] = value
        im = ax.imshow(grid, origin="lower", cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(lus)), [f"{v:g}" for v in lus])
        ax.set_yticks(range(len(lks)), [f"{v:g}" for v in lks])
        ax.set_xlabel("lambda_u")
        ax.set_ylabel("lambda_k")
        ax.set_title(f"{metric}, gamma={gamma:g}")
        fig.colorbar(im, ax=ax)
    return _finish(fig, path)
