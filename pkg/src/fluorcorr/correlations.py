"""
Steady states, two-time correlators and spectra of the driven emitter.

Two-time averages follow the quantum regression theorem,
``<X(0) Y(tau) Z(0)> = Tr[Y exp(L tau) (Z rho X)]``, evaluated through one
eigendecomposition of ``L`` shared by all delays. Negative delays of the
filtered cross-correlation are obtained by swapping the roles of the two
sensors, never by propagating backwards.

Filtered correlations are computed at two sensor couplings and extrapolated
to zero coupling in ``epsilon**2`` (Richardson).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from . import model
from .errors import EpsilonNotConverged, ZeroIntensity
from .model import SensorParams, Superoperator, SystemParams, as_homodyne
from .qmatrix import EigenSystem, dag, eig, null_vector, propagate, solve_shifted, unvec, vec

log = logging.getLogger(__name__)

#: Richardson convergence gate on the relative correction.
EPSILON_RTOL = 1e-3
#: Intensity below which g2 is not normalizable.
MIN_INTENSITY = 1e-30


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    labels: tuple[str, ...]

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Spectrum:
    coherent_weight: float
    omega_grid: np.ndarray
    incoherent_density: np.ndarray
    total_incoherent: float
    population: float
    params: SystemParams | None = None

    def integrated_incoherent(self) -> float:
        return float(np.trapezoid(self.incoherent_density, self.omega_grid))


@dataclass(frozen=True)
class CorrelationTrace:
    tau: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def branch(self, sign: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.tau > 0 if sign > 0 else self.tau < 0
        return self.tau[mask], self.values[mask]


def eigensystem(l: Superoperator) -> EigenSystem:
    return eig(l.matrix, scale=l.scale)


def steady_state(l: Superoperator) -> DensityMatrix:
    """Normalized, Hermitized kernel of ``l``."""
    trace_row = vec(np.eye(l.hilbert_dim, dtype=complex))
    rho = unvec(null_vector(l.matrix, scale=l.scale, normalize=trace_row))
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + dag(rho))
    return DensityMatrix(rho, l.labels)


def two_time(l: Superoperator, rho_ss: DensityMatrix, x, y, z, tau, es: EigenSystem | None = None):
    """``<X(0) Y(tau) Z(0)>`` in the steady state, for scalar or array ``tau >= 0``."""
    es = eigensystem(l) if es is None else es
    v = vec(z @ rho_ss.matrix @ x)
    w = propagate(es, v, tau)
    # Tr[Y M] = vec(Y^T) . vec(M)
    return vec(np.asarray(y).T) @ w


def _symmetric_grid(tau_grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tau = np.asarray(tau_grid, dtype=float)
    grid, inverse = np.unique(np.abs(tau), return_inverse=True)
    return tau, grid, inverse


def g2_homodyned(p: SystemParams, f, tau_grid) -> CorrelationTrace:
    """Unfiltered g2 of the field ``sigma - f <sigma>``."""
    f = as_homodyne(f)
    l = model.build_system_liouvillian(p)
    rho = steady_state(l)
    sigma = model.SIGMA_MINUS
    alpha = rho.expect(sigma)
    s = sigma - f.f * alpha * np.eye(2)
    sd = dag(s)
    intensity = rho.expect(sd @ s).real
    if intensity < MIN_INTENSITY:
        raise ZeroIntensity(f"detected intensity {intensity:.3g} vanishes (f={f.f}, omega={p.omega_drive})")
    tau, grid, inverse = _symmetric_grid(tau_grid)
    num = two_time(l, rho, sd, sd @ s, s, grid).real
    values = (num / intensity**2)[inverse]
    meta = {"system": p, "homodyne": f.f, "alpha": alpha, "intensity": intensity, "filtered": False}
    return CorrelationTrace(tau, values, meta)


def bare_coherence(p: SystemParams) -> complex:
    rho = steady_state(model.build_system_liouvillian(p))
    return rho.expect(model.SIGMA_MINUS)


def filtered_g2_at_epsilon(
    p: SystemParams, s1: SensorParams, s2: SensorParams, f, tau_grid, epsilon: float,
    alpha: complex | None = None,
) -> CorrelationTrace:
    """Sensor cross-correlation at a fixed coupling, without extrapolation.

    For ``tau >= 0`` sensor 1 clicks first; for ``tau < 0`` sensor 2 does.
    Both branches are normalized by the same steady-state population product.
    """
    f = as_homodyne(f)
    alpha = bare_coherence(p) if alpha is None else alpha
    s1, s2 = s1.with_epsilon(epsilon), s2.with_epsilon(epsilon)
    l = model.build_full_liouvillian(p, s1, s2, f, alpha, check_coupling=False)
    es = eigensystem(l)
    rho = steady_state(l)
    a1, a2 = model.embed("sensor1"), model.embed("sensor2")
    n1op, n2op = dag(a1) @ a1, dag(a2) @ a2
    n1, n2 = rho.expect(n1op).real, rho.expect(n2op).real
    if min(n1, n2) < MIN_INTENSITY * epsilon**2:
        raise ZeroIntensity(f"sensor populations {n1:.3g}, {n2:.3g} vanish")
    tau = np.asarray(tau_grid, dtype=float)
    values = np.empty(tau.shape)
    pos = tau >= 0
    if pos.any():
        values[pos] = two_time(l, rho, dag(a1), n2op, a1, tau[pos], es=es).real
    if (~pos).any():
        values[~pos] = two_time(l, rho, dag(a2), n1op, a2, -tau[~pos], es=es).real
    values /= n1 * n2
    meta = {"system": p, "sensors": (s1, s2), "homodyne": f.f, "alpha": alpha,
            "epsilon": epsilon, "populations": (n1, n2), "filtered": True}
    return CorrelationTrace(tau, values, meta)


def richardson(coarse: np.ndarray, fine: np.ndarray) -> tuple[np.ndarray, float]:
    """Extrapolate in ``epsilon**2`` from couplings ``eps`` and ``eps/2``.

    Returns the extrapolated values and the largest correction applied to the
    finer evaluation, relative to ``max(|g|, 1)``.
    """
    extrap = (4.0 * fine - coarse) / 3.0
    disc = float(np.max(np.abs(fine - extrap) / np.maximum(np.abs(extrap), 1.0)))
    return extrap, disc


def filtered_g2(
    p: SystemParams, s1: SensorParams, s2: SensorParams, f=0.0, tau_grid=None,
    epsilon: float | None = None,
) -> CorrelationTrace:
    """Frequency-filtered g2 between sensors 1 and 2 in the zero-coupling limit."""
    f = as_homodyne(f)
    if s1.epsilon is not None and s2.epsilon is not None and s1.epsilon != s2.epsilon:
        raise model.InvalidParams("both sensors must share the same coupling")
    if tau_grid is None:
        tau_grid = default_tau_grid(p, s1, s2)
    eps0 = epsilon or s1.epsilon or s2.epsilon or model.default_epsilon(p, s1, s2)
    alpha = bare_coherence(p)
    coarse = filtered_g2_at_epsilon(p, s1, s2, f, tau_grid, eps0, alpha).values
    eps_used = [eps0, eps0 / 2]
    fine = filtered_g2_at_epsilon(p, s1, s2, f, tau_grid, eps0 / 2, alpha)
    values, disc = richardson(coarse, fine.values)
    if disc > EPSILON_RTOL:
        log.info("epsilon extrapolation off by %.3g at eps=%.3g; retrying at eps/4", disc, eps0)
        finer = filtered_g2_at_epsilon(p, s1, s2, f, tau_grid, eps0 / 4, alpha)
        values, disc = richardson(fine.values, finer.values)
        eps_used.append(eps0 / 4)
        fine = finer
        if disc > EPSILON_RTOL:
            raise EpsilonNotConverged(
                f"relative epsilon discrepancy {disc:.3g} > {EPSILON_RTOL:g} at {p}, {s1}, {s2}, f={f.f}"
            )
    meta = dict(fine.meta)
    meta.update(epsilon=tuple(eps_used), discrepancy=disc, sensors=(s1, s2))
    return CorrelationTrace(fine.tau, values, meta)


def default_tau_grid(p: SystemParams, s1: SensorParams, s2: SensorParams, count: int = 1001):
    slow = min(p.gamma_sigma, s1.gamma_filter, s2.gamma_filter)
    return np.linspace(-10.0 / slow, 10.0 / slow, count)


def incoherent_density(p: SystemParams, omega) -> np.ndarray:
    """Incoherent spectral density per unit frequency at laser-relative ``omega``.

    Solves ``(L + P + i omega) x = v`` where ``v = vec(rho sigma^+)`` minus its
    steady-state part and ``P`` projects onto the steady state; adding ``P``
    keeps the system regular at ``omega = 0`` without changing the solution.
    """
    l = model.build_system_liouvillian(p)
    rho = steady_state(l).matrix
    sigma = model.SIGMA_MINUS
    r0 = vec(rho)
    v = vec(rho @ dag(sigma))
    v = v - np.trace(rho @ dag(sigma)) * r0
    m = l.matrix + np.outer(r0, vec(np.eye(2)))
    omega = np.asarray(omega, dtype=float)
    x = solve_shifted(m, -1j * np.atleast_1d(omega), v)
    resolved = -(x @ vec(sigma.T))
    out = resolved.real / np.pi
    return out[0] if omega.ndim == 0 else out


def spectrum(p: SystemParams, omega_grid) -> Spectrum:
    l = model.build_system_liouvillian(p)
    rho = steady_state(l)
    sigma = model.SIGMA_MINUS
    alpha = rho.expect(sigma)
    population = rho.expect(dag(sigma) @ sigma).real
    coherent = abs(alpha) ** 2
    grid = np.asarray(omega_grid, dtype=float)
    return Spectrum(
        coherent_weight=coherent,
        omega_grid=grid,
        incoherent_density=incoherent_density(p, grid),
        total_incoherent=population - coherent,
        population=population,
        params=p,
    )


def spectral_peaks(p: SystemParams, omega_grid) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of the incoherent density, refined between grid points."""
    grid = np.asarray(omega_grid, dtype=float)
    dens = incoherent_density(p, grid)
    idx, _ = find_peaks(dens)
    positions, heights = [], []
    for i in idx:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(lambda w: -incoherent_density(p, w), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-9 * max(1.0, abs(hi))})
        positions.append(res.x)
        heights.append(-res.fun)
    return np.array(positions), np.array(heights)


def asymmetry_ratio(p: SystemParams, points: int = 4001) -> float:
    """Incoherent weight within 5 linewidths of ``+delta`` over the weight near ``-delta``."""
    width = 5.0 * (p.gamma_sigma + 2.0 * p.gamma_phi)
    weights = []
    for center in (p.delta, -p.delta):
        w = np.linspace(center - width, center + width, points)
        weights.append(np.trapezoid(incoherent_density(p, w), w))
    return float(weights[0] / weights[1])


@dataclass(frozen=True)
class DephasingRow:
    gamma_phi: float
    asymmetry_ratio: float
    total_incoherent: float


def dephasing_lineshape_scan(p: SystemParams, gamma_phi_list, omega_grid) -> list[Spectrum]:
    return [spectrum(p.replace(gamma_phi=float(g)), omega_grid) for g in gamma_phi_list]


def dephasing_summary(spectra: list[Spectrum]) -> list[DephasingRow]:
    return [
        DephasingRow(s.params.gamma_phi, asymmetry_ratio(s.params), s.total_incoherent)
        for s in spectra
    ]
