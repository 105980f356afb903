"""Closed-form star-graph results and the trajectory fitting pipeline.

The solvable star model is L leaf spins coupled to the central qubit by
``lam * sum_i s^z_i s^z_c`` with a transverse field h_c on the center
only.  Every leaf configuration is conserved, so the infinite-temperature
leaf autocorrelation reduces to a binomially weighted sum of two-level
precession traces, one magnetization sector at a time (O(L) per time
point, any L).

The sector sum enumerates the L-1 spectator leaves by their up count and
splits off the probed leaf explicitly; this combinatorially exact form is
pinned against full exact diagonalization in the tests.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammaln

from .errors import NumericalError
from .observables import TimeSeries

logger = logging.getLogger("ringstar.star")


class FitError(NumericalError):
    """Curve fit rejected or failed; carries the best residual seen."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class StarParams:
    """Star-graph parameters: leaf count, star coupling, central field."""

    L: int
    lam: float
    h_c: float

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("need at least one leaf")


# -- closed forms ---------------------------------------------------------------

def star_autocorrelation_exact(p: StarParams, t) -> np.ndarray | float:
    """Infinite-temperature <s^x_i(t) s^x_i> on a leaf of the star model.

    Flipping the probed leaf splits every conserved sector into effective
    magnetizations Z = S + 1 and Z' = S - 1 (S the spectator sum), each
    driving the central qubit at frequency w_Z = sqrt(h_c^2 + lam^2 Z^2):

        C(t) = 2^{1-L} sum_S binom(L-1, n_up) *
               [ cos(w_Z t) cos(w_Z' t)
                 + (h_c^2 + lam^2 Z Z') * t^2 sinc(w_Z t) sinc(w_Z' t) ]

    written with sinc so the w -> 0 sector is exact rather than special
    cased.  h_c = 0 collapses to cos(2 lam t); lam = 0 gives 1.
    """
    t = np.asarray(t, dtype=float)
    n_up = np.arange(p.L)  # up spins among the L-1 spectators
    spectator = 2.0 * n_up - (p.L - 1)
    z_plus = spectator + 1.0
    z_minus = spectator - 1.0
    log_weights = (gammaln(p.L) - gammaln(n_up + 1) - gammaln(p.L - n_up)
                   - (p.L - 1) * math.log(2.0))
    weights = np.exp(log_weights)

    w_p = np.sqrt(p.h_c**2 + p.lam**2 * z_plus**2)[:, None]
    w_m = np.sqrt(p.h_c**2 + p.lam**2 * z_minus**2)[:, None]
    tt = t[None, :]
    cross = (p.h_c**2 + p.lam**2 * z_plus * z_minus)[:, None]
    # t*sinc(w t/pi) = sin(w t)/w, exact at w = 0
    sin_p = tt * np.sinc(w_p * tt / math.pi)
    sin_m = tt * np.sinc(w_m * tt / math.pi)
    kernel = np.cos(w_p * tt) * np.cos(w_m * tt) + cross * sin_p * sin_m
    out = weights @ kernel
    return out if out.ndim else float(out)


def star_otoc_exact(p: StarParams, t) -> np.ndarray | float:
    """Same-leaf OTOC C_xx(i, i, t) = 2 sin^2(2 lam t) at the h_c = 0 point."""
    if p.h_c != 0.0:
        raise ValueError("the closed-form star OTOC holds only for h_c = 0")
    t = np.asarray(t, dtype=float)
    out = 2.0 * np.sin(2.0 * p.lam * t) ** 2
    return out if out.ndim else float(out)


def leaf_pair_otoc_reference(h: float, t, coeff: float = 1.0) -> np.ndarray | float:
    """Early-time leaf-to-leaf OTOC reference curve, coeff * h^2 * t^6."""
    t = np.asarray(t, dtype=float)
    out = coeff * h**2 * t**6
    return out if out.ndim else float(out)


# -- fit results ------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """Extracted fit parameters with standard errors and the window used."""

    model_id: str
    parameters: dict
    stderr: dict
    residual_rms: float
    window: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps({
            "model_id": self.model_id,
            "params": self.parameters,
            "stderr": self.stderr,
            "residual_rms": self.residual_rms,
            "window": list(self.window),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        return cls(d["model_id"], d["params"], d["stderr"],
                   d["residual_rms"], tuple(d["window"]))


def _windowed(series: TimeSeries, window: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    t_min, t_max = window
    if t_min >= t_max:
        raise FitError(f"empty window {window}")
    mask = (series.times >= t_min) & (series.times <= t_max)
    if mask.sum() < 4:
        raise FitError(f"window {window} holds only {int(mask.sum())} samples")
    return series.times[mask], series.values[mask]


def _moving_average(times: np.ndarray, values: np.ndarray,
                    period: float) -> tuple[np.ndarray, np.ndarray]:
    dt = float(np.median(np.diff(times)))
    k = int(round(period / dt))
    if k <= 1:
        return times, values
    kernel = np.full(k, 1.0 / k)
    smoothed = np.convolve(values, kernel, mode="valid")
    lo = (k - 1) // 2
    return times[lo:lo + len(smoothed)], smoothed


def fit_decaying_cosine(series: TimeSeries, window: tuple[float, float],
                        smooth_period: float | None = None) -> FitResult:
    """Least-squares fit to a*cos(eps0*t + phi)*exp(-eps1*t), eps0, eps1 >= 0.

    The dominant FFT frequency seeds eps0; the window must contain at
    least four oscillation periods of it or the fit is rejected as
    degenerate.  With `smooth_period` set, a centered moving average of
    that width is applied before fitting.
    """
    times, values = _windowed(series, window)
    if smooth_period:
        times, values = _moving_average(times, values, smooth_period)

    span = times[-1] - times[0]
    centered = values - values.mean()
    if np.max(np.abs(centered)) < 1e-12 * max(1.0, np.max(np.abs(values))):
        raise FitError("constant series: degenerate frequency", residual=0.0)
    dt = float(np.median(np.diff(times)))
    spectrum = np.abs(np.fft.rfft(centered))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(len(centered), d=dt)
    # seed from the strongest spectral peaks that leave >= 4 periods in window
    order = np.argsort(spectrum[1:])[::-1] + 1
    seeds = [float(freqs[k]) for k in order[:6]
             if freqs[k] * span >= 4 * 2.0 * math.pi][:3]
    if not seeds:
        raise FitError(
            f"no spectral peak with >= 4 periods inside the {span:.3g}-wide window")

    amp0 = float(np.max(np.abs(centered)))

    def model(x, t):
        a, eps0, phi, eps1 = x
        return a * np.cos(eps0 * t + phi) * np.exp(-eps1 * t)

    def residuals(x):
        return model(x, times) - values

    best = None
    for eps0_guess in seeds:
        for phi0 in (0.0, 0.5 * math.pi):
            sol = least_squares(
                residuals, x0=[amp0, eps0_guess, phi0, 1e-3],
                bounds=([0.0, 0.0, -2 * math.pi, 0.0],
                        [np.inf, np.inf, 2 * math.pi, np.inf]))
            if best is None or sol.cost < best.cost:
                best = sol
    rms = math.sqrt(2.0 * best.cost / len(times))
    if not best.success:
        raise FitError("decaying-cosine fit did not converge", residual=rms)
    a, eps0, phi, eps1 = best.x
    if eps0 * span < 4 * 2.0 * math.pi:
        raise FitError(
            f"fitted frequency leaves {eps0 * span / (2 * math.pi):.2f} "
            "periods in the window; need >= 4", residual=rms)

    dof = max(1, len(times) - 4)
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac) * (2.0 * best.cost / dof)
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        errs = np.full(4, math.nan)
    return FitResult(
        model_id="decaying_cosine",
        parameters={"amplitude": a, "eps0": eps0, "phase": phi, "eps1": eps1},
        stderr={"amplitude": errs[0], "eps0": errs[1], "phase": errs[2],
                "eps1": errs[3]},
        residual_rms=rms,
        window=(float(times[0]), float(times[-1])))


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Slope, intercept and their standard errors for y = slope*x + b."""
    n = len(x)
    a = np.vstack([x, np.ones(n)]).T
    coef, residual, *_ = np.linalg.lstsq(a, y, rcond=None)
    slope, intercept = coef
    if n > 2:
        ss = float(residual[0]) if len(residual) else float(
            np.sum((y - a @ coef) ** 2))
        var = ss / (n - 2)
        cov = var * np.linalg.inv(a.T @ a)
        return slope, intercept, math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    return slope, intercept, math.nan, math.nan


def fit_power_law(series: TimeSeries, window: tuple[float, float]) -> FitResult:
    """ln-ln regression of value on t: returns alpha * t^beta.

    Non-positive samples inside the window are dropped (the effective
    window is reported in the result and logged).
    """
    times, values = _windowed(series, window)
    keep = (values > 0) & (times > 0)
    if not np.all(keep):
        logger.warning("power-law window shrank from %d to %d positive samples",
                       len(values), int(keep.sum()))
    times, values = times[keep], values[keep]
    if len(times) < 4:
        raise FitError("fewer than 4 positive samples for the power-law fit")
    beta, ln_alpha, beta_err, ln_alpha_err = _linear_fit(np.log(times), np.log(values))
    alpha = math.exp(ln_alpha)
    pred = alpha * times**beta
    rms = float(np.sqrt(np.mean((pred - values) ** 2)))
    return FitResult(
        model_id="power_law",
        parameters={"alpha": alpha, "beta": beta},
        stderr={"alpha": alpha * ln_alpha_err, "beta": beta_err},
        residual_rms=rms,
        window=(float(times[0]), float(times[-1])))


def fit_loglinear(series: TimeSeries, window: tuple[float, float]) -> FitResult:
    """Least-squares fit to offset + slope * ln t."""
    times, values = _windowed(series, window)
    keep = times > 0
    times, values = times[keep], values[keep]
    if len(times) < 4:
        raise FitError("fewer than 4 samples at t > 0 for the log fit")
    slope, offset, slope_err, offset_err = _linear_fit(np.log(times), values)
    pred = offset + slope * np.log(times)
    rms = float(np.sqrt(np.mean((pred - values) ** 2)))
    return FitResult(
        model_id="loglinear",
        parameters={"offset": offset, "slope": slope},
        stderr={"offset": offset_err, "slope": slope_err},
        residual_rms=rms,
        window=(float(times[0]), float(times[-1])))


# -- crossover extraction ----------------------------------------------------------

@dataclass(frozen=True)
class CrossoverCurve:
    """One S(t*) vs lambda curve at fixed (L, h_c)."""

    L: int
    h_c: float
    lambdas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if lam.shape != val.shape or lam.ndim != 1:
            raise ValueError("lambdas and values must be equal-length 1-d arrays")
        if len(lam) < 8:
            raise ValueError("need >= 8 lambda samples spanning the maximum")
        if not np.all(np.diff(lam) > 0):
            raise ValueError("lambdas must be strictly increasing")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)


@dataclass(frozen=True)
class CrossoverResult:
    lambda_c: dict          # (L, h_c) -> interpolated maximum
    edge_flagged: tuple     # (L, h_c) keys whose maximum sat on the window edge
    gamma: float | None     # d ln(lambda_c) / d ln(L)
    gamma_stderr: float | None
    kappa: float | None     # d ln(lambda_c) / d ln(h_c)
    kappa_stderr: float | None


def _quadratic_peak(x: np.ndarray, y: np.ndarray, k: int) -> float:
    a, b, _ = np.polyfit(x[k - 1:k + 2], y[k - 1:k + 2], 2)
    if a >= 0:  # not concave around the sample maximum; keep the grid point
        return float(x[k])
    return float(-b / (2 * a))


def find_lambda_c(curves: list[CrossoverCurve]) -> CrossoverResult:
    """Interpolated maxima of S(t*) vs lambda and their (L, h_c) scaling.

    Curves whose sampled maximum falls on the first or last grid point are
    flagged and excluded from the exponent regression.  gamma and kappa
    come from a joint regression of ln lambda_c on (ln L, ln h_c); an
    exponent is None when its variable does not vary across the curves.
    """
    lambda_c: dict = {}
    edge: list = []
    for curve in curves:
        k = int(np.argmax(curve.values))
        key = (curve.L, curve.h_c)
        if k == 0 or k == len(curve.lambdas) - 1:
            edge.append(key)
            lambda_c[key] = float(curve.lambdas[k])
            continue
        lambda_c[key] = _quadratic_peak(curve.lambdas, curve.values, k)

    usable = [key for key in lambda_c if key not in edge]
    gamma = gamma_err = kappa = kappa_err = None
    if len(usable) >= 2:
        ln_l = np.log([key[0] for key in usable])
        ln_h = np.log([key[1] for key in usable])
        ln_lc = np.log([lambda_c[key] for key in usable])
        cols = [np.ones(len(usable))]
        labels = []
        if np.ptp(ln_l) > 0:
            cols.append(ln_l)
            labels.append("gamma")
        if np.ptp(ln_h) > 0:
            cols.append(ln_h)
            labels.append("kappa")
        if labels and len(usable) > len(cols):
            a = np.vstack(cols).T
            coef, residual, *_ = np.linalg.lstsq(a, ln_lc, rcond=None)
            ss = float(residual[0]) if len(residual) else float(
                np.sum((ln_lc - a @ coef) ** 2))
            dof = len(usable) - len(cols)
            cov = (ss / dof) * np.linalg.inv(a.T @ a) if dof > 0 else None
            for pos, label in enumerate(labels, start=1):
                err = math.sqrt(cov[pos, pos]) if cov is not None else math.nan
                if label == "gamma":
                    gamma, gamma_err = float(coef[pos]), err
                else:
                    kappa, kappa_err = float(coef[pos]), err
    return CrossoverResult(lambda_c, tuple(edge), gamma, gamma_err,
                           kappa, kappa_err)


def select_t_star(reference: TimeSeries, flatness: float = 0.05) -> float:
    """Earliest time where the reference entropy reaches half its plateau.

    The plateau is the mean over the trailing decade of the time grid,
    which must be flat to within `flatness` (relative spread) or the
    series is rejected as unsaturated.
    """
    times, values = reference.times, reference.values
    tail = times >= times[-1] / 10.0
    tail_vals = values[tail]
    mean = float(tail_vals.mean())
    if mean <= 0 or (tail_vals.max() - tail_vals.min()) > flatness * mean:
        raise NumericalError("reference series has not saturated "
                             "(trailing decade is not flat)")
    half = 0.5 * mean
    above = np.nonzero(values >= half)[0]
    if len(above) == 0:
        raise NumericalError("series never reaches half its plateau")
    return float(times[above[0]])
