"""
Least-squares exponent fits in log-log space.

Growth and decay claims of the form ``y = O(x^alpha)`` are turned into a
measurable exponent by fitting ``log y = alpha log x + c``.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from .exceptions import FitError

logger = logging.getLogger(__name__)

Window = Tuple[float, float]


@dataclass(frozen=True)
class FitReport:
    """
    Result of a log-log fit.

    Args:
        exponent: Fitted slope (decay fits report the negated slope)
        intercept: Fitted log-space intercept
        window: (min, max) of the abscissae actually used
        residual: RMS of the log-space residuals
        n_points: Number of points used
    """

    exponent: float
    intercept: float
    window: Window
    residual: float
    n_points: int

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["window"] = list(self.window)
        data["alpha"] = data.pop("exponent")
        data["c"] = data.pop("intercept")
        return data


def _select(xs: np.ndarray, ys: np.ndarray, window: Optional[Window]) -> Tuple[np.ndarray, np.ndarray]:
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError(f"xs and ys must be 1D of equal length, got {xs.shape} and {ys.shape}")
    if np.any(np.diff(xs) <= 0):
        raise FitError("Abscissae must be strictly increasing")
    if window is not None:
        lo, hi = window
        keep = (xs >= lo) & (xs <= hi)
        xs, ys = xs[keep], ys[keep]
    if xs.size < 3:
        raise FitError(f"Need at least 3 points in the fit window, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise FitError("Power-law fits need positive finite values")
    return xs, ys


def _log_fit(xs: np.ndarray, ys: np.ndarray) -> Tuple[float, float, float]:
    log_x = np.log(xs).reshape(-1, 1)
    log_y = np.log(ys)
    model = LinearRegression().fit(log_x, log_y)
    residuals = log_y - model.predict(log_x)
    rms = math.sqrt(float(np.mean(residuals ** 2)))
    return float(model.coef_[0]), float(model.intercept_), rms


def fit_power_law(
    xs: Sequence[float], ys: Sequence[float], window: Optional[Window] = None
) -> FitReport:
    """
    Fit ``log y = alpha log x + c`` over the points with x inside ``window``.

    Args:
        xs: Increasing positive abscissae
        ys: Positive values
        window: Inclusive (lo, hi) filter on xs; all points when None

    Returns:
        FitReport with exponent alpha
    """
    xs, ys = _select(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), window)
    slope, intercept, rms = _log_fit(xs, ys)
    report = FitReport(slope, intercept, (float(xs[0]), float(xs[-1])), rms, int(xs.size))
    logger.debug("Power-law fit: alpha=%.6g c=%.6g rms=%.3g n=%d", slope, intercept, rms, xs.size)
    return report


def fit_decay_with_log(
    ts: Sequence[float], es: Sequence[float], k: int, window: Optional[Window] = None
) -> FitReport:
    """
    Effective polynomial decay rate of ``E^{1/2}`` once ``(log t)^{k/2+1}`` is divided out.

    The reported exponent is the negated slope of
    ``log(E^{1/2} (log t)^{-(k/2+1)})`` against ``log t``, so a decay like
    ``(log t)^{k/2+1} / t^{k/2}`` reports ``k/2``.

    Args:
        ts: Increasing times, all >= 2
        es: Energies at ts
        k: Smoothness index of the data
        window: Optional (lo, hi) time window
    """
    ts = np.asarray(ts, dtype=float)
    es = np.asarray(es, dtype=float)
    if ts.size and ts.min() < 2:
        raise FitError(f"Decay fits need t >= 2, got t={ts.min()}")
    if np.any(es <= 0):
        raise FitError("Energies must be positive for a log-space fit")
    ys = np.sqrt(es) * np.log(ts) ** (-(k / 2 + 1))
    report = fit_power_law(ts, ys, window)
    return FitReport(-report.exponent, report.intercept, report.window, report.residual, report.n_points)
