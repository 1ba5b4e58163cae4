"""Delimited output and figure rendering for the experiment drivers.

Every table-producing command writes a rate-table CSV plus the raw per-step
error series, and renders a matplotlib figure next to the delimited output.
Numbers are written with 17 significant digits and LF line endings.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

TIMESERIES_HEADER = "step,time,energy,div_l2_max,alpha_min"
RATE_HEADER = "param,err_u,rate_u,err_p,rate_p"


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


def write_timeseries_csv(path, rows):
    """rows of (step, time, energy, div_l2_max, alpha_min)."""
    lines = [TIMESERIES_HEADER]
    for step, t, energy, div, alpha in rows:
        lines.append(",".join([str(int(step))] +
                              [_fmt(v) for v in (t, energy, div, alpha)]))
    _write(path, lines)


def write_rate_table_csv(path, rows):
    """rows of RateRow-like (param, err_u, rate_u, err_p, rate_p)."""
    lines = [RATE_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in
                              (r.param, r.err_u, r.rate_u, r.err_p, r.rate_p)))
    _write(path, lines)


def write_series_csv(path, series):
    """Raw per-step error series (param, step, time, err_u, err_p)."""
    lines = ["param,step,time,err_u,err_p"]
    for param, step, t, eu, ep in series:
        lines.append(",".join([_fmt(param), str(int(step)), _fmt(t),
                               _fmt(eu), _fmt(ep)]))
    _write(path, lines)


def _write(path, lines):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# -- figures -------------------------------------------------------------------

def render_energy_figure(path, curves: dict, title="Energy vs. time"):
    """curves: label -> (times, energies)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (t, e) in curves.items():
        ax.plot(t, e, label=label, lw=1.5)
    ax.set_xlabel("time")
    ax.set_ylabel("energy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rate_figure(path, rows, param_name, ref_slope=None,
                       invert_param=False, title="Convergence"):
    """Log-log error plot of a sweep, with an optional reference slope."""
    params = np.array([r.param for r in rows], dtype=float)
    errs = np.array([r.err_u for r in rows], dtype=float)
    keep = (params > 0) & (errs > 0)
    params, errs = params[keep], errs[keep]
    if len(params) == 0:
        return
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(params, errs, "o-", label="velocity error")
    if ref_slope is not None and len(params) > 1:
        expo = -ref_slope if invert_param else ref_slope
        ref = errs[0] * (params / params[0]) ** expo
        ax.loglog(params, ref, "k--", alpha=0.6,
                  label=f"slope {ref_slope:g} reference")
    ax.set_xlabel(param_name)
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def snapshot_steps(n_steps: int, count: int):
    """Evenly spaced step indices ending at the final step."""
    if count <= 0 or n_steps < 1:
        return []
    count = min(count, n_steps)
    return sorted({int(round(k * n_steps / count)) for k in range(1, count + 1)})
