"""Figure rendering for the CLI report paths.

Every figure is written next to the machine-readable output it illustrates
(CSV/JSON stay the data of record). PNGs are kept byte-deterministic:
fixed figure geometry, no timestamps, and the encoder's Software metadata
stripped, so repeated runs with equal seeds produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_METADATA = {"Software": None}  # drop the matplotlib version stamp


def save_success_histogram(success_counts: list[int], evals_per_agent: int, path) -> None:
    """Bar chart: how many agents achieved each success count."""
    buckets = list(range(evals_per_agent + 1))
    heights = [sum(1 for c in success_counts if c == b) for b in buckets]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(buckets, heights, color="#b23b3b", edgecolor="black", linewidth=0.6)
    ax.set_xlabel(f"successful evaluations (out of {evals_per_agent})")
    ax.set_ylabel("trained agents")
    ax.set_title("Distribution of evaluation successes across trained agents")
    ax.set_xticks(buckets)
    ax.yaxis.get_major_locator().set_params(integer=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_training_curve(returns: list[float], path, success_iteration: int | None = None) -> None:
    """Episode return per training iteration, with the stop point marked."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(range(1, len(returns) + 1), returns, linewidth=0.8, color="#2c5f8a")
    if success_iteration is not None:
        ax.axvline(success_iteration, color="#b23b3b", linestyle="--", linewidth=1.0,
                   label=f"greedy success at iteration {success_iteration}")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("training iteration")
    ax.set_ylabel("episode return")
    ax.set_title("Training episode returns")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
