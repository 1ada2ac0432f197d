"""
Closed-form results for detuned resonance fluorescence and the ideal
two-photon cascade, plus a least-squares fit of the cascade model to a
computed cross-correlation.

The cascade model is an uncorrelated trigger stream of rate ``gamma1``
whose photons are followed (probability ``p``, rate ``gamma2``) or preceded
(probability ``1 - p``, rate ``gamma2_bar``) by a partner photon::

    g(tau) = 1 + (1 - p) (gamma2_bar / gamma1) exp(gamma2_bar tau)    tau < 0
    g(tau) = 1 + p (gamma2 / gamma1) exp(-gamma2 tau)                 tau > 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitDivergence, InsufficientWindow, InvalidParams, UndefinedAtZero, ZeroDriving
from .model import SystemParams

#: Filter-limited region excluded from fits, in units of 1/Gamma.
GAP_CUT = 3.0
#: Largest accepted fit residual as a fraction of the fitted dynamic range.
MAX_RELATIVE_RESIDUAL = 0.1
#: Good-ordering threshold on p used in reports. This is our own operational
#: cut, not a published number.
GOOD_ORDERING_P = 0.9
MIN_BRANCH_POINTS = 4


@dataclass(frozen=True)
class CascadeParams:
    p: float
    gamma1: float
    gamma2: float
    gamma2_bar: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParams(f"p must lie in [0, 1], got {self.p}")
        for name in ("gamma1", "gamma2", "gamma2_bar"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be > 0")

    @property
    def amplitude_after(self) -> float:
        return self.p * self.gamma2 / self.gamma1

    @property
    def amplitude_before(self) -> float:
        return (1.0 - self.p) * self.gamma2_bar / self.gamma1

    @classmethod
    def from_branches(cls, amp_after, rate_after, amp_before, rate_before) -> "CascadeParams":
        """Invert branch amplitudes and rates into ``(p, gamma1, gamma2, gamma2_bar)``."""
        w_after = max(amp_after, 0.0) / rate_after
        w_before = max(amp_before, 0.0) / rate_before
        total = w_after + w_before
        if total <= 0:
            raise FitDivergence("both fitted branch amplitudes are non-positive")
        return cls(p=w_after / total, gamma1=1.0 / total, gamma2=rate_after, gamma2_bar=rate_before)


def cascade_g2(c: CascadeParams, tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau == 0):
        raise UndefinedAtZero("the cascade correlation is discontinuous at tau = 0")
    after = 1.0 + c.amplitude_after * np.exp(-c.gamma2 * np.abs(tau))
    before = 1.0 + c.amplitude_before * np.exp(-c.gamma2_bar * np.abs(tau))
    out = np.where(tau > 0, after, before)
    return float(out) if out.ndim == 0 else out


def gaps(c: CascadeParams) -> tuple[float, float]:
    """Absolute and relative gap between the ``tau -> 0+`` and ``tau -> 0-`` limits."""
    plus, minus = 1.0 + c.amplitude_after, 1.0 + c.amplitude_before
    return plus - minus, plus / minus


@dataclass(frozen=True)
class BranchFit:
    amplitude: float
    rate: float
    rms: float
    method: str


@dataclass(frozen=True)
class CascadeFit:
    params: CascadeParams
    absolute_gap: float
    relative_gap: float
    residual: float
    relative_residual: float
    window: tuple[float, float]

    @property
    def good_ordering(self) -> bool:
        return self.params.p > GOOD_ORDERING_P

    def report(self) -> str:
        c = self.params
        lines = [
            f"p = {c.p:.17g}",
            f"gamma1 = {c.gamma1:.17g}",
            f"gamma2 = {c.gamma2:.17g}",
            f"gamma2_bar = {c.gamma2_bar:.17g}",
            f"gamma2_over_gamma1 = {c.gamma2 / c.gamma1:.17g}",
            f"absolute_gap = {self.absolute_gap:.17g}",
            f"relative_gap = {self.relative_gap:.17g}",
            f"residual_rms = {self.residual:.17g}",
            f"relative_residual = {self.relative_residual:.17g}",
            f"window = [{self.window[0]:.17g}, {self.window[1]:.17g}]",
            f"good_ordering(p>{GOOD_ORDERING_P}) = {str(self.good_ordering).lower()}",
        ]
        return "\n".join(lines)


def fit_branch(t: np.ndarray, g: np.ndarray) -> BranchFit:
    """Fit ``g = 1 + A exp(-k t)`` on ``t > 0``.

    Traces spanning several decades are fitted linearly in ``log(g - 1)``;
    otherwise a bounded nonlinear least-squares fit is used, started from the
    log fit of the points that lie above 1.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if t.size < MIN_BRANCH_POINTS:
        raise InsufficientWindow(f"only {t.size} points in the fitted branch")
    excess = g - 1.0
    if excess.min() > 0.1:
        slope, intercept = np.polyfit(t, np.log(excess), 1)
        amp, rate = float(np.exp(intercept)), float(-slope)
        method = "log"
        if rate <= 0:
            raise FitDivergence(f"log-space fit gave a non-decaying rate {rate:.3g}")
    else:
        ok = excess > 0
        if ok.sum() >= 2:
            slope, intercept = np.polyfit(t[ok], np.log(excess[ok]), 1)
            amp0, rate0 = float(np.exp(intercept)), max(float(-slope), 1e-3)
        else:
            amp0, rate0 = max(float(excess.max()), 1e-6), 1.0
        sol = least_squares(
            lambda x: x[0] * np.exp(-x[1] * t) - excess,
            x0=[amp0, rate0],
            bounds=([-np.inf, 1e-12], [np.inf, np.inf]),
            x_scale="jac",
        )
        amp, rate = float(sol.x[0]), float(sol.x[1])
        method = "nls"
    rms = float(np.sqrt(np.mean((1.0 + amp * np.exp(-rate * t) - g) ** 2)))
    return BranchFit(amp, rate, rms, method)


def fit_cascade(trace, window=None, gamma_filter: float | None = None) -> CascadeFit:
    """Fit the cascade model to a two-sided correlation trace.

    Parameters
    ----------
    trace : CorrelationTrace
        Must contain samples on both sides of ``tau = 0``.
    window : (float, float), optional
        Range of ``|tau|`` to fit. Defaults to the full extent of the trace.
    gamma_filter : float, optional
        Filter linewidth; samples with ``|tau| < 3/gamma_filter`` are dropped.
        Taken from ``trace.meta['sensors']`` when not given.
    """
    tau = np.asarray(trace.tau, dtype=float)
    values = np.asarray(trace.values, dtype=float)
    if gamma_filter is None and "sensors" in trace.meta:
        gamma_filter = min(s.gamma_filter for s in trace.meta["sensors"])
    lo, hi = window if window is not None else (0.0, float(np.max(np.abs(tau))))
    if gamma_filter:
        lo = max(lo, GAP_CUT / gamma_filter)
    if not hi > lo:
        raise InsufficientWindow(f"empty fit window [{lo}, {hi}]")
    mag = np.abs(tau)
    inside = (mag >= lo) & (mag <= hi)
    after_mask = inside & (tau > 0)
    before_mask = inside & (tau < 0)
    after = fit_branch(mag[after_mask], values[after_mask])
    before = fit_branch(mag[before_mask], values[before_mask])
    params = CascadeParams.from_branches(after.amplitude, after.rate, before.amplitude, before.rate)
    model_vals = cascade_g2(params, tau[inside])
    resid = float(np.sqrt(np.mean((model_vals - values[inside]) ** 2)))
    span = float(np.ptp(values[inside]))
    rel = resid / span if span > 0 else 0.0
    absolute, relative = gaps(params)
    fit = CascadeFit(params, absolute, relative, resid, rel, (lo, hi))
    if rel > MAX_RELATIVE_RESIDUAL:
        exc = FitDivergence(f"fit residual is {rel:.3g} of the dynamic range (limit {MAX_RELATIVE_RESIDUAL})")
        exc.fit = fit
        raise exc
    return fit


def oscillation_amplitude(trace, window=(1.0, 5.0)) -> float:
    """RMS residual of a single-exponential fit on ``tau`` in ``window``, over the trace mean there."""
    tau = np.asarray(trace.tau, dtype=float)
    values = np.asarray(trace.values, dtype=float)
    mask = (tau >= window[0]) & (tau <= window[1])
    fit = fit_branch(tau[mask], values[mask])
    return fit.rms / float(np.mean(values[mask]))


def _heitler_ratio(p: SystemParams) -> float:
    return 8.0 * p.omega_drive**2 / (p.gamma_sigma**2 + 4.0 * p.delta**2)


def homodyned_g20(p: SystemParams) -> float:
    """Zero-delay g2 of the emission with its coherent part fully removed."""
    if p.omega_drive <= 0:
        raise ZeroDriving("the fully homodyned coincidence diverges at zero driving")
    g, d, om = p.gamma_sigma, p.delta, p.omega_drive
    return (g**2 + 4 * d**2) * (g**2 + 4 * (8 * om**2 + d**2)) / (64 * om**4)


def sidepeak_ratio(p: SystemParams) -> float:
    """Incoherent over coherent intensity at weak driving."""
    return _heitler_ratio(p)


def cascade_rate(p: SystemParams) -> float:
    return p.gamma_sigma * (1.0 - _heitler_ratio(p))


def equal_height_drive(delta: float) -> float:
    """Driving at which the central incoherent peak matches the side peaks (for gamma << delta)."""
    if delta < 0:
        raise InvalidParams("delta must be non-negative")
    return delta / np.sqrt(2.0)
