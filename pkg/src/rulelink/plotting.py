"""Figures written next to the text reports.

PNG metadata is stripped so reruns produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

WIDTH = 6.4


def setup_plt():
    plt.rcParams.update({
        "figure.dpi": 100,
        "font.size": 8,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.3,
    })


def save_fig(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_eval(report, path, max_relations: int = 40) -> Path:
    """Grouped bars of Hits@k and MRR: overall plus the most frequent relations."""
    setup_plt()
    rels = sorted(report.per_relation.items(), key=lambda kv: (-kv[1].n_tasks, kv[0]))[:max_relations]
    rows = [("ALL", report.overall), *rels]
    cutoffs = report.overall.cutoffs
    names = [*(f"hits@{n}" for n in cutoffs), "mrr"]
    values = np.array([[m.hits(n) for n in cutoffs] + [m.mrr] for _, m in rows])
    fig, ax = plt.subplots(figsize=(WIDTH, 2.0 + 0.12 * len(rows)))
    y = np.arange(len(rows))
    h = 0.8 / len(names)
    for j, name in enumerate(names):
        ax.barh(y + (j - (len(names) - 1) / 2) * h, values[:, j], height=h, label=name)
    ax.set_yticks(y)
    ax.set_yticklabels([r[0][-40:] for r in rows])
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("score")
    ax.legend(loc="lower right", fontsize=7)
    ax.set_title(f"filtered ranking metrics ({report.n_tasks} tasks)")
    return save_fig(fig, path)


def plot_search(result, path) -> Path:
    """Mean validation fitness across units per trial, with its running best."""
    setup_plt()
    traces = [u.trace for u in result.units.values() if not u.default and u.trace.size]
    fig, ax = plt.subplots(figsize=(WIDTH, 3.2))
    if traces:
        mean = np.mean(np.vstack(traces), axis=0)
        if result.config.strategy == "grid":
            x = result.rows[:, 0]
            ax.plot(x, mean, lw=1)
            ax.set_xlabel("threshold (all six equal)")
        else:
            x = np.arange(1, mean.size + 1)
            ax.plot(x, mean, lw=0.5, alpha=0.5, label="trial")
            best = np.maximum.accumulate(np.vstack(traces), axis=1).mean(axis=0)
            ax.plot(x, best, lw=1.2, label="per-unit best so far")
            ax.set_xlabel("iteration")
            ax.legend(fontsize=7)
    ax.set_ylabel("validation MRR (mean over units)")
    ax.set_title(f"{result.config.strategy} threshold search")
    return save_fig(fig, path)
