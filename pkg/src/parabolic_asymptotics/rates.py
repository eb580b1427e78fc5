"""Scaled error norms along a trajectory, log-log slope fits and verdicts.

A verdict is one-sided: the decay theorems are upper bounds, so a measured
slope steeper than predicted passes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError
from .field import Field, format_number, gradient_array, integrate

LOG_SLACK = 1e-12
# Weighted series are judged against K/2 - SIGMA (any sigma > 0 is admissible).
SIGMA = 0.05
SHARPNESS_BAND = 0.15
MIN_FIT_POINTS = 8


@dataclass
class NormSeries:
    q: float
    j: int
    times: np.ndarray
    values: np.ndarray
    weight: float | None = None
    horizon: float | None = None
    label: str = ""
    note: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise DomainError("times and values differ in length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("series times must be strictly increasing")
        if self.horizon is None and self.times.size:
            self.horizon = float(self.times[-1])

    def __len__(self):
        return self.times.size

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "scaled_value"])
            for t, v in zip(self.times, self.values):
                w.writerow([format_number(t), format_number(v)])


@dataclass
class RateVerdict:
    fitted_slope: float
    predicted_exponent: float
    log_correction: bool
    tolerance: float
    window: tuple
    passed: bool
    label: str = ""
    sharp: bool = False
    note: str = ""
    extra: dict = dc_field(default_factory=dict)

    @property
    def margin(self) -> float:
        """How far below the pass threshold the slope landed (positive is good)."""
        return -self.predicted_exponent + self.tolerance - self.fitted_slope

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        log = " (log-corrected)" if self.log_correction else ""
        text = (f"{status} {self.label}: slope {self.fitted_slope:.4f}{log} vs "
                f"{-self.predicted_exponent:.4f} + {self.tolerance:g} on "
                f"[{self.window[0]:g}, {self.window[1]:g}]")
        return text + (f"; {self.note}" if self.note else "")


def _check_A(A):
    if not A > 1:
        raise DomainError(f"rate predictions need A > 1, got A={A}")


def predicted_rate(K: float, A: float, n: int):
    """(exponent, log_flag) for the U_n error: min{K/2, (n+1)(A-1)}."""
    _check_A(A)
    if K < 0 or n < 0:
        raise DomainError("K and n must be nonnegative")
    lead = (n + 1) * (A - 1.0)
    return min(K / 2.0, lead), bool(abs(2.0 * lead - K) <= LOG_SLACK)


def predicted_rate_tilde(K: float, A: float):
    """(exponent, log_flag) for the modified profiles: min{K/2, 2(A-1)}."""
    _check_A(A)
    if K < 0:
        raise DomainError("K must be nonnegative")
    return min(K / 2.0, 2.0 * (A - 1.0)), bool(abs(K - 4.0 * (A - 1.0)) <= LOG_SLACK)


def predicted_rate_weighted(K: float, A: float, n: int, sigma=SIGMA):
    _check_A(A)
    return min(K / 2.0 - sigma, (n + 1) * (A - 1.0)), False


def _profile_stack(profile):
    """(times, array of shape (n_t, m, *grid)) from a profile or a trajectory."""
    if hasattr(profile, "states"):
        return np.asarray(profile.times), profile.states
    return np.asarray(profile.times), profile.values


def _norm(grid, diff, q, j, weight):
    if j == 1:
        a = np.sqrt(np.sum(gradient_array(grid, diff) ** 2, axis=0))
    else:
        a = np.abs(diff)
    if weight is not None:
        return integrate(grid, (1.0 + grid.radius) ** weight * a)
    if np.isinf(q):
        return float(a.max())
    if q == 1:
        return integrate(grid, a)
    return integrate(grid, a**q) ** (1.0 / q)


def measure_error_series(traj, profile, q=1, j=0, weight=None, t_min=1.0, component=0,
                         label="") -> NormSeries:
    """t^{(N/2)(1-1/q) + j/2} ||grad^j (u - U)(t)||_q at every shared time >= t_min.

    With ``weight=l`` the weighted form t^{j/2} (1+t)^{-l/2} |||grad^j (u - U)|||_l
    is measured instead (q is then ignored). Zero values are dropped, with a note.
    """
    if q < 1:
        raise DomainError(f"L^q norm needs q >= 1, got {q}")
    if j not in (0, 1):
        raise DomainError(f"derivative order j must be 0 or 1, got {j}")
    if weight is not None and weight < 0:
        raise DomainError("weight exponent must be >= 0")
    grid, N = traj.grid, traj.grid.dim
    p_times, p_vals = _profile_stack(profile)
    times, values = [], []
    for kp, t in enumerate(p_times):
        if t < t_min:
            continue
        k = traj.index(t)
        diff = traj.states[k, component] - p_vals[kp, component]
        raw = _norm(grid, diff, q, j, weight)
        if weight is None:
            scale = t ** (N / 2.0 * (1.0 - 1.0 / q) + j / 2.0)
        else:
            scale = t ** (j / 2.0) * (1.0 + t) ** (-weight / 2.0)
        times.append(t)
        values.append(scale * raw)
    times, values = np.array(times), np.array(values)
    keep = values > 0
    note = ""
    if not np.all(keep):
        note = f"dropped {int(np.sum(~keep))} zero values"
        times, values = times[keep], values[keep]
    return NormSeries(q, j, times, values, weight, traj.horizon, label, note)


def default_window(horizon):
    return (horizon / 10.0, horizon / 2.0)


def fit_slope(series, window=None, log_corrected=False) -> float:
    """Least-squares slope of log(value) against log(t) inside ``window``.

    ``series`` is a NormSeries or a (times, values) pair. With
    ``log_corrected`` the values are divided by log(2 + t) first.
    """
    if isinstance(series, NormSeries):
        times, values, horizon = series.times, series.values, series.horizon
    else:
        times, values = (np.asarray(a, dtype=float) for a in series)
        horizon = float(times[-1]) if times.size else 0.0
    lo, hi = window if window is not None else default_window(horizon)
    sel = (times >= lo * (1 - 1e-12)) & (times <= hi * (1 + 1e-12)) & (values > 0)
    if np.sum(sel) < MIN_FIT_POINTS:
        raise DomainError(
            f"slope fit needs >= {MIN_FIT_POINTS} positive points in [{lo:g}, {hi:g}], got {int(np.sum(sel))}"
        )
    t, v = times[sel], values[sel]
    if log_corrected:
        v = v / np.log(2.0 + t)
    slope, _ = np.polyfit(np.log(t), np.log(v), 1)
    return float(slope)


def judge(series, exponent, log_flag=False, tolerance=0.15, window=None, label="",
          note="") -> RateVerdict:
    """One-sided verdict: pass iff slope <= -exponent + tolerance."""
    if window is None:
        horizon = series.horizon if isinstance(series, NormSeries) else float(np.asarray(series[0])[-1])
        window = default_window(horizon)
    window = (float(window[0]), float(window[1]))
    slope = fit_slope(series, window, log_flag)
    passed = slope <= -exponent + tolerance
    sharp = abs(slope + exponent) <= SHARPNESS_BAND
    if isinstance(series, NormSeries) and series.note:
        note = "; ".join(s for s in (note, series.note) if s)
    return RateVerdict(slope, float(exponent), bool(log_flag), tolerance, window, bool(passed),
                       label, bool(sharp), note)


def verdict(series, K, A, n=0, variant="Un", tolerance=0.15, window=None, label="") -> RateVerdict:
    """Compare a measured series with the predicted exponent of its variant."""
    if variant == "Un":
        if isinstance(series, NormSeries) and series.weight is not None:
            exponent, log_flag = predicted_rate_weighted(K, A, n)
        else:
            exponent, log_flag = predicted_rate(K, A, n)
    elif variant in ("tilde", "hat"):
        exponent, log_flag = predicted_rate_tilde(K, A)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    note = ""
    # the o(t^{-K/2}) case cannot be told apart from O(t^{-K/2}) on a finite horizon
    if abs(exponent - K / 2.0) <= LOG_SLACK and K == math.floor(K) and not log_flag:
        note = "o-rate case: consistent, not proved"
    return judge(series, exponent, log_flag, tolerance, window, label or f"{variant} n={n}", note)


VERDICT_KEYS = ("benchmark", "variant", "n", "component", "q", "j", "series")


def write_verdicts(verdicts, path, keys=None):
    """Summary CSV, one row per verdict; ``keys`` gives the VERDICT_KEYS columns per row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(VERDICT_KEYS) + [
            "window_lo", "window_hi", "fitted_slope", "predicted_exponent",
            "log_correction", "tolerance", "pass", "sharp"])
        for i, v in enumerate(verdicts):
            key = keys[i] if keys else ("",) * len(VERDICT_KEYS)
            w.writerow([str(k) for k in key] + [
                format_number(v.window[0]), format_number(v.window[1]),
                format_number(v.fitted_slope), format_number(v.predicted_exponent),
                str(v.log_correction).lower(), format_number(v.tolerance),
                str(v.passed).lower(), str(v.sharp).lower(),
            ])
