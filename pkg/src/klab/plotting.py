"""Optional PNG figures for experiment results (matplotlib, Agg backend)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    tmp = path + ".tmp.png"
    fig.savefig(tmp, dpi=110, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)
    return path


def ratio_histogram(ratios, path, title="T_N ratio"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(ratios, bins=min(30, max(5, len(ratios) // 3)), color="0.35")
    ax.axvline(1.0, color="crimson", lw=1)
    ax.set_xlabel("T_N / (sum psi / zeta(2))")
    ax.set_ylabel("draws")
    ax.set_title(title)
    return _save(fig, path)


def deviation_curve(times, devs, ses, path, xlabel="t", title="deviation"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(times, devs, yerr=ses, marker="o", capsize=3, color="k")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("|mean - target|")
    ax.set_title(title)
    return _save(fig, path)


def loglog_points(xs, ys, path, xlabel, ylabel, title="", ref_slope=None):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(xs, ys, "o-", color="k")
    if ref_slope is not None and len(xs):
        x0, y0 = xs[0], ys[0]
        ax.loglog(xs, [y0 * (x / x0) ** ref_slope for x in xs], "--", color="crimson", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def systole_histogram(systoles, path, title="endpoint systoles"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(systoles, bins=60, color="0.35")
    ax.set_xlabel("systole")
    ax.set_ylabel("replicas")
    ax.set_title(title)
    return _save(fig, path)
