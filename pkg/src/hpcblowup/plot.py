from __future__ import annotations

import matplotlib.pyplot as plt
import numpy as np

from hpcblowup.burgers import wbar
from hpcblowup.solver import SlopeSeries


def plot_profile(ax: plt.Axes, y: np.ndarray, W: np.ndarray | None = None, param_dict=None):
    """Plot a self-similar profile against the stable Burgers profile.

    Parameters
    ----------
    ax
        axes instance.
    y
        similarity coordinates.
    W
        sampled profile on `y`; only the reference :func:`.burgers.wbar` is drawn if
        not given.
    param_dict
        dictionary defining custom matplotlib settings to be passed to
        :func:`plot` for `W`.
    """
    if param_dict is None:
        param_dict = {}
    ax.grid(True)
    out = ax.plot(y, wbar(y), color="black", linestyle="--", label="reference")
    if W is not None:
        out += ax.plot(y, W, **param_dict)
    ax.set_xlabel("y")
    ax.set_ylabel("W")
    plt.tight_layout()
    return out


def plot_slope_series(
    ax: plt.Axes, series: SlopeSeries, t_star: float | None = None, param_dict=None
):
    """Plot ``|min w_x|`` on log axes, against ``T* - t`` if `t_star` is given."""
    if param_dict is None:
        param_dict = {}
    ax.grid(True)
    if t_star is None:
        out = ax.semilogy(series.t, np.abs(series.min_wx), **param_dict)
        ax.set_xlabel("t")
    else:
        keep = series.t < t_star
        out = ax.loglog(t_star - series.t[keep], np.abs(series.min_wx[keep]), **param_dict)
        ax.set_xlabel("T* - t")
    ax.set_ylabel("|min w_x|")
    plt.tight_layout()
    return out
