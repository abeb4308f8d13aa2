"""
Plotly figures for the task outputs. Figures are saved as SVG through kaleido.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from .fitting import FitReport

logger = logging.getLogger(__name__)


def _layout(fig: go.Figure, title: str, x_title: str, y_title: str, log: bool = False) -> go.Figure:
    fig.update_layout(
        title=title,
        xaxis_title=x_title,
        yaxis_title=y_title,
        plot_bgcolor="white",
        paper_bgcolor="white",
        legend=dict(orientation="h", y=-0.2),
    )
    if log:
        fig.update_xaxes(type="log")
        fig.update_yaxes(type="log")
    return fig


def _empty(title: str) -> go.Figure:
    fig = go.Figure()
    fig.add_annotation(
        text="No data available",
        xref="paper", yref="paper",
        x=0.5, y=0.5, showarrow=False,
        font=dict(size=16, color="gray"),
    )
    fig.update_layout(title=title)
    return fig


def _fit_line(xs: np.ndarray, fit: FitReport, sign: float = 1.0) -> np.ndarray:
    return np.exp(fit.intercept) * xs ** (sign * fit.exponent)


def sweep_figure(frame: pd.DataFrame, fit: Optional[FitReport], title: str = "Resolvent norm") -> go.Figure:
    """Log-log plot of ``norm`` against ``lambda`` with the fitted power law."""
    ok = frame[~frame["failed"]]
    if ok.empty:
        return _empty(title)
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=ok["lambda"], y=ok["norm"], mode="markers+lines", name="estimate"))
    if fit is not None:
        xs = np.geomspace(fit.window[0], fit.window[1], 50)
        fig.add_trace(go.Scatter(x=xs, y=_fit_line(xs, fit), mode="lines",
                                 line=dict(dash="dash"), name=f"fit alpha={fit.exponent:.3f}"))
    return _layout(fig, title, "lambda", "norm", log=True)


def energy_figure(frame: pd.DataFrame, title: str = "Energy decay") -> go.Figure:
    """``sqrt(E)`` on log-log axes against time."""
    late = frame[frame["t"] > 0]
    if late.empty:
        return _empty(title)
    fig = go.Figure(go.Scatter(x=late["t"], y=late["sqrtE"], mode="lines", name="sqrt(E)"))
    return _layout(fig, title, "t", "sqrt(E)", log=True)


def spectrum_figure(frame: pd.DataFrame, a_max: float, title: str = "Generator spectrum") -> go.Figure:
    """Eigenvalue scatter with the band ``0 <= Im lam <= 2 a_max``."""
    if frame.empty:
        return _empty(title)
    fig = go.Figure(go.Scatter(x=frame["re_lambda"], y=frame["im_lambda"], mode="markers",
                               marker=dict(size=4), name="eigenvalues"))
    fig.add_hline(y=0.0, line=dict(color="gray", dash="dot"))
    fig.add_hline(y=2 * a_max, line=dict(color="firebrick", dash="dash"), annotation_text="2 a_max")
    return _layout(fig, title, "Re lambda", "Im lambda")


def r0_figure(frame: pd.DataFrame, title: str = "One-dimensional resolvent") -> go.Figure:
    if frame.empty:
        return _empty(title)
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=frame["tau"], y=frame["norm"], mode="lines", name="||R_0||"))
    fig.add_trace(go.Scatter(x=frame["tau"], y=frame["norm_times_1plustau"], mode="lines",
                             name="(1+tau) ||R_0||"))
    return _layout(fig, title, "tau", "norm", log=True)


def quasimode_figure(frame: pd.DataFrame, ks: Sequence[int], title: str = "Quasimode residuals") -> go.Figure:
    if frame.empty:
        return _empty(title)
    fig = go.Figure()
    for k in ks:
        rows = frame[frame["k"] == k]
        fig.add_trace(go.Scatter(x=rows["t"], y=rows["residual"], mode="markers+lines", name=f"k={k}"))
    return _layout(fig, title, "t", "residual")


def save_svg(fig: go.Figure, path: Path) -> bool:
    """Write ``fig`` as SVG; a missing or broken kaleido only costs the figure."""
    try:
        fig.write_image(str(path), format="svg")
        return True
    except Exception as e:
        logger.warning("Could not write figure %s: %s", path, e)
        return False
