"""
Liouvillians of a driven, detuned two-level emitter and of the same emitter
watched by two weakly coupled two-level sensors.

Everything is written in the frame rotating at the laser frequency, so the
emitter sits at ``delta`` and sensor frequencies are laser-relative. Rates
are in whatever unit ``gamma_sigma`` is expressed in (1 by convention).

The dissipator convention is ``(rate/2) * (2 c rho c^+ - c^+ c rho - rho c^+ c)``.
Pure dephasing enters as the channel ``sigma^+ sigma`` at rate ``2 gamma_phi``,
so the emitter coherence decays at ``gamma_sigma/2 + gamma_phi`` and the
line broadens from ``gamma_sigma`` to ``gamma_sigma + 2 gamma_phi``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CouplingTooStrong, InvalidParams
from .qmatrix import dag, kron

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

#: Factor order of the composite Hilbert space.
FACTORS = ("sigma", "sensor1", "sensor2")

#: Default sensor coupling relative to the slowest of gamma_sigma and Gamma.
EPSILON_FRACTION = 1e-3
#: Weak-coupling bound relative to the slowest of gamma_sigma and Gamma.
EPSILON_BOUND = 1e-2


@dataclass(frozen=True)
class SystemParams:
    gamma_sigma: float = 1.0
    omega_drive: float = 0.1
    delta: float = 20.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        if not self.gamma_sigma > 0:
            raise InvalidParams(f"gamma_sigma must be > 0, got {self.gamma_sigma}")
        if not self.omega_drive >= 0:
            raise InvalidParams(f"omega_drive must be >= 0, got {self.omega_drive}")
        if not self.gamma_phi >= 0:
            raise InvalidParams(f"gamma_phi must be >= 0, got {self.gamma_phi}")
        if not np.isfinite(self.delta):
            raise InvalidParams("delta must be finite")

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class SensorParams:
    """A sensor at laser-relative frequency ``omega`` with linewidth ``gamma_filter``.

    ``epsilon=None`` means "use the default coupling", resolved against the
    emitter by :func:`resolve_epsilon`.
    """

    omega: float
    gamma_filter: float = 10.0
    epsilon: float | None = None

    def __post_init__(self):
        if not self.gamma_filter > 0:
            raise InvalidParams(f"gamma_filter must be > 0, got {self.gamma_filter}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidParams(f"epsilon must be > 0, got {self.epsilon}")
        if not np.isfinite(self.omega):
            raise InvalidParams("sensor omega must be finite")

    def with_epsilon(self, epsilon: float) -> "SensorParams":
        return SensorParams(self.omega, self.gamma_filter, epsilon)


def default_epsilon(p: SystemParams, *sensors: SensorParams) -> float:
    rates = [p.gamma_sigma] + [s.gamma_filter for s in sensors]
    return EPSILON_FRACTION * min(rates)


def resolve_epsilon(p: SystemParams, s: SensorParams) -> SensorParams:
    if s.epsilon is not None:
        return s
    return s.with_epsilon(default_epsilon(p, s))


@dataclass(frozen=True)
class HomodyneFraction:
    """Fraction of the coherent field removed by the homodyning laser (0 to 1)."""

    f: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.f <= 1.0:
            raise InvalidParams(f"homodyne fraction must lie in [0, 1], got {self.f}")

    def __float__(self):
        return float(self.f)


def as_homodyne(f) -> HomodyneFraction:
    return f if isinstance(f, HomodyneFraction) else HomodyneFraction(float(f))


@dataclass(frozen=True)
class Superoperator:
    """Generator acting on column-stacked density matrices.

    ``scale`` is an optional diagonal similarity that removes the powers of
    the sensor coupling before the eigendecomposition in
    :mod:`fluorcorr.qmatrix`; it does not change the physics.
    """

    matrix: np.ndarray
    hilbert_dim: int
    labels: tuple[str, ...]
    scale: np.ndarray | None = field(default=None, compare=False)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.hilbert_dim
        return (self.matrix @ rho.reshape(-1, order="F")).reshape((d, d), order="F")

    def trace_defect(self) -> float:
        """Largest entry of ``vec(I)^T L`` relative to the largest entry of ``L``."""
        row = np.eye(self.hilbert_dim).reshape(-1, order="F") @ self.matrix
        return float(np.max(np.abs(row)) / np.max(np.abs(self.matrix)))


def liouvillian(h: np.ndarray, collapse: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Dense Liouvillian for ``-i[h, rho] + sum (rate/2) L_c rho``."""
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c, rate in collapse:
        if rate == 0:
            continue
        cdc = dag(c) @ c
        out = out + 0.5 * rate * (
            2 * np.kron(c.conj(), c) - np.kron(eye, cdc) - np.kron(cdc.T, eye)
        )
    return out


def embed(op_name: str, lowering: bool = True) -> np.ndarray:
    """8x8 lowering (or raising) operator of one factor of emitter (x) sensor1 (x) sensor2."""
    if op_name not in FACTORS:
        raise InvalidParams(f"unknown factor {op_name!r}; expected one of {FACTORS}")
    ops = [IDENTITY2] * 3
    ops[FACTORS.index(op_name)] = SIGMA_MINUS if lowering else dag(SIGMA_MINUS)
    return kron(*ops)


def system_hamiltonian(p: SystemParams, sigma: np.ndarray) -> np.ndarray:
    n = dag(sigma) @ sigma
    return p.delta * n + p.omega_drive * (sigma + dag(sigma))


def build_system_liouvillian(p: SystemParams) -> Superoperator:
    sigma = SIGMA_MINUS
    n = dag(sigma) @ sigma
    lmat = liouvillian(system_hamiltonian(p, sigma), [(sigma, p.gamma_sigma), (n, 2.0 * p.gamma_phi)])
    return Superoperator(lmat, 2, ("sigma",))


def sensor_scale(eps1: float, eps2: float) -> np.ndarray:
    """Liouville-space similarity dividing each sensor excitation by its coupling."""
    n1 = np.array([(i >> 1) & 1 for i in range(8)], dtype=float)
    n2 = np.array([i & 1 for i in range(8)], dtype=float)
    d = eps1 ** (-n1) * eps2 ** (-n2)
    return np.kron(d, d)


def build_full_liouvillian(
    p: SystemParams,
    s1: SensorParams,
    s2: SensorParams,
    f=0.0,
    alpha: complex = 0.0,
    check_coupling: bool = True,
) -> Superoperator:
    """Emitter plus two sensors, each driven by ``sigma - f * alpha``.

    ``alpha`` is the bare steady-state coherence of the emitter; the
    homodyne term ``-f*eps*(alpha s^+ + alpha* s)`` cancels the coherent part
    of the field reaching each sensor when ``f == 1``.
    """
    f = float(as_homodyne(f))
    s1, s2 = resolve_epsilon(p, s1), resolve_epsilon(p, s2)
    if check_coupling:
        for s in (s1, s2):
            bound = EPSILON_BOUND * min(p.gamma_sigma, s.gamma_filter)
            if s.epsilon > bound:
                warnings.warn(
                    f"sensor coupling {s.epsilon:g} exceeds the weak-coupling bound {bound:g}",
                    CouplingTooStrong,
                    stacklevel=2,
                )
    sigma = embed("sigma")
    h = system_hamiltonian(p, sigma)
    collapse = [(sigma, p.gamma_sigma), (dag(sigma) @ sigma, 2.0 * p.gamma_phi)]
    for name, s in (("sensor1", s1), ("sensor2", s2)):
        a = embed(name)
        h = h + s.omega * dag(a) @ a
        h = h + s.epsilon * (sigma @ dag(a) + dag(sigma) @ a)
        if f:
            h = h - f * s.epsilon * (alpha * dag(a) + np.conj(alpha) * a)
        collapse.append((a, s.gamma_filter))
    lmat = liouvillian(h, collapse)
    return Superoperator(lmat, 8, FACTORS, scale=sensor_scale(s1.epsilon, s2.epsilon))
