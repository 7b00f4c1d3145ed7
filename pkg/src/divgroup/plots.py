"""Matplotlib renderings of solutions and simulation sweeps.

Figures accompany the delimited reports: value functions per default state
with their barriers, the barrier levels across states, and policy-scale
sweeps with error bars.  The Agg backend keeps rendering headless.
"""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .recursion import PolicySolution
from .simulate import ComparisonRow

__all__ = ["value_function_figure", "barrier_figure", "simulation_figure"]

_DPI = 150


def value_function_figure(sol: PolicySolution, out_path: str, points: int = 400) -> str:
    """One panel per default state: each surviving line's value component and barrier."""
    states = [z for z in sol.params.states() if z.surviving]
    cols = min(3, len(states))
    rows = (len(states) + cols - 1) // cols
    fig, axes = plt.subplots(
        rows, cols, figsize=(4.2 * cols, 3.2 * rows), squeeze=False, layout="constrained"
    )
    for ax in axes.flat[len(states):]:
        ax.set_visible(False)
    for ax, state in zip(axes.flat, states):
        span = max(sol.barrier(i, state) for i in state.surviving)
        xs = np.linspace(0.0, 1.6 * span, points)
        for i in state.surviving:
            s = sol.solution(i, state)
            ax.plot(xs, s.f.eval_many(xs), label=f"line {i}")
            ax.axvline(s.m, linestyle="--", linewidth=0.8, color="gray")
        ax.set_title(f"state {state.bitstring}", fontsize=10)
        ax.set_xlabel("surplus")
        ax.set_ylabel("value")
        ax.legend(fontsize=8)
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def barrier_figure(sol: PolicySolution, out_path: str) -> str:
    """Grouped bars of barrier levels by default state."""
    states = [z for z in sol.params.states() if z.surviving]
    n = sol.params.n
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(states), 3.4), layout="constrained")
    width = 0.8 / n
    for i in range(1, n + 1):
        offs = (i - 1 - (n - 1) / 2) * width
        pos, heights = [], []
        for k, state in enumerate(states):
            if not state.is_defaulted(i):
                pos.append(k + offs)
                heights.append(sol.barrier(i, state))
        ax.bar(pos, heights, width=width * 0.9, label=f"line {i}")
    ax.set_xticks(range(len(states)), [z.bitstring for z in states])
    ax.set_xlabel("default state")
    ax.set_ylabel("barrier")
    ax.legend(fontsize=8)
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def simulation_figure(
    rows: Sequence[ComparisonRow], out_path: str, analytic: float | None = None
) -> str:
    """Estimates with three-sigma bars across policy scales."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4), layout="constrained")
    xs = [row.scale for row in rows]
    ys = [row.result.estimate for row in rows]
    es = [3.0 * row.result.std_error for row in rows]
    ax.errorbar(xs, ys, yerr=es, fmt="o-", capsize=3, label="simulated (3 s.e.)")
    if analytic is not None:
        ax.axhline(analytic, linestyle="--", linewidth=0.9, color="tab:red", label="analytic")
    ax.set_xlabel("barrier scale")
    ax.set_ylabel("estimated value")
    ax.legend(fontsize=8)
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path
