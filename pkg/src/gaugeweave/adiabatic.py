"""Time-dependent Schrodinger evolution along a parameter trajectory.

Integration is by exponential midpoint steps, each exactly unitary, so the
state norm only drifts by round-off.  Phases are read off against the
reference-gauge eigenstates of ``H(R(t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import NonAdiabatic, StepTooLarge
from .geometry import EigenBundle
from .weakvalue import gamma_rate_weak

NORM_DRIFT_LIMIT = 1e-6
LEAKAGE_LIMIT = 0.1
# largest accepted change of the unwrapped phase between samples
PHASE_JUMP_LIMIT = 0.5 * np.pi


@dataclass(frozen=True)
class TimePath:
    """Samples ``R(t_k)`` at ``t_k = k * dt``.

    ``func`` (and optionally ``velocity_func``) give the trajectory between
    samples; without them the integrator interpolates linearly.
    """

    samples: np.ndarray
    dt: float
    closed: bool = False
    func: Callable[[float], np.ndarray] | None = field(default=None, compare=False)
    velocity_func: Callable[[float], np.ndarray] | None = field(default=None, compare=False)
    period: np.ndarray | None = None

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] < 2:
            raise ValueError("a time path needs at least two samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", s)
        if self.closed:
            gap = s[-1] - s[0]
            if self.period is not None:
                per = np.asarray(self.period, dtype=float)
                finite = np.isfinite(per)
                safe = np.where(finite, per, 1.0)
                gap = np.where(finite, gap - safe * np.round(gap / safe), gap)
            if np.max(np.abs(gap)) > 1e-9:
                raise ValueError("a closed path must end where it starts")

    @classmethod
    def from_function(cls, func, total_time: float, steps: int, closed: bool = False,
                      velocity=None, period=None) -> TimePath:
        dt = total_time / steps
        t = dt * np.arange(steps + 1)
        samples = np.array([func(tk) for tk in t])
        return cls(samples, dt, closed, func, velocity, period)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.shape[0])

    @property
    def total_time(self) -> float:
        return self.dt * (self.samples.shape[0] - 1)

    def at(self, t: float) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(t), dtype=float)
        x = t / self.dt
        k = min(int(np.floor(x)), self.samples.shape[0] - 2)
        f = x - k
        return (1 - f) * self.samples[k] + f * self.samples[k + 1]

    def velocity(self) -> np.ndarray | None:
        if self.velocity_func is None:
            return None
        return np.array([self.velocity_func(t) for t in self.times])


def cone_path(theta: float, omega: float, loops: int = 1, steps_per_loop: int = 2000,
              phi0: float = 0.0) -> TimePath:
    """Azimuthal circle at polar angle ``theta`` in ``(theta, phi)`` coordinates.

    The azimuth is unwrapped, so it runs ``phi0 -> phi0 + 2 pi loops``.
    """
    T = 2 * np.pi * loops / omega
    return TimePath.from_function(lambda t: np.array([theta, phi0 + omega * t]), T,
                                  steps_per_loop * loops, closed=True,
                                  velocity=lambda t: np.array([0.0, omega]),
                                  period=[np.inf, 2 * np.pi])


@dataclass
class EvolutionResult:
    """Trajectory sampled at the path times.

    ``coefficients[k, m] = <u_m(R(t_k))|psi(t_k)>`` in the reference gauge.
    """

    times: np.ndarray
    states: np.ndarray
    coefficients: np.ndarray
    energies: np.ndarray
    band: int
    leakage: np.ndarray
    dynamical_phase: np.ndarray
    geometric_phase: np.ndarray
    path: TimePath | None = None
    hbar: float = 1.0

    @property
    def max_leakage(self) -> float:
        return float(np.max(self.leakage))

    @property
    def norm_defect(self) -> float:
        return float(np.max(np.abs(np.sum(np.abs(self.states) ** 2, axis=1) - 1.0)))


def _unitary_step(H: np.ndarray, h: float, hbar: float) -> np.ndarray:
    E, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * E * h / hbar)) @ V.conj().T


def _phases(coeffs: np.ndarray, energies: np.ndarray, n: int, dt: float, hbar: float):
    En = energies[:, n]
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (En[1:] + En[:-1]) * dt)]) * (-1.0 / hbar)
    raw = np.angle(coeffs[:, n]) - theta
    steps = np.angle(np.exp(1j * np.diff(raw)))
    if steps.size and np.max(np.abs(steps)) > PHASE_JUMP_LIMIT:
        raise StepTooLarge("phase changes by more than pi/2 between samples; refine the path")
    gamma = np.concatenate([[np.angle(coeffs[0, n])], np.angle(coeffs[0, n]) + np.cumsum(steps)])
    return theta, gamma


def evolve_tdse(hamiltonian_builder, path: TimePath, psi0, dt_sub: float,
                band: int | None = None, hbar: float = 1.0) -> EvolutionResult:
    """Integrate ``i hbar d psi/dt = H(R(t)) psi`` along ``path``.

    Each sample interval is split into ``ceil(dt / dt_sub)`` exponential
    midpoint steps.  ``psi0`` is normalised first.  ``band`` is the level the
    phases refer to; by default the one with the largest initial weight.

    Raises
    ------
    StepTooLarge
        If the norm drifts by more than ``1e-6`` or the phase cannot be
        unwrapped between samples.
    """
    if not 0 < dt_sub <= path.dt * (1 + 1e-12):
        raise ValueError("dt_sub must be positive and no larger than the path step")
    psi = np.asarray(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    n_sub = max(1, math.ceil(path.dt / dt_sub - 1e-9))
    h = path.dt / n_sub
    K = path.samples.shape[0]
    states = np.empty((K, psi.size), dtype=complex)
    H0 = np.asarray(hamiltonian_builder(path.samples[0]), dtype=complex)
    E, V = linalg.eig_hermitian_batch(H0)
    energies = np.empty((K, E.size))
    coeffs = np.empty((K, E.size), dtype=complex)
    states[0], energies[0], coeffs[0] = psi, E, V.conj().T @ psi
    for k in range(1, K):
        t0 = (k - 1) * path.dt
        for j in range(n_sub):
            Rm = path.at(t0 + (j + 0.5) * h)
            psi = _unitary_step(np.asarray(hamiltonian_builder(Rm), dtype=complex), h, hbar) @ psi
        drift = abs(np.vdot(psi, psi).real - 1.0)
        if drift > NORM_DRIFT_LIMIT:
            raise StepTooLarge(f"norm drifted by {drift:.2e}")
        E, V = linalg.eig_hermitian_batch(np.asarray(hamiltonian_builder(path.samples[k]), dtype=complex))
        states[k], energies[k], coeffs[k] = psi, E, V.conj().T @ psi
    if band is None:
        band = int(np.argmax(np.abs(coeffs[0])))
    leakage = np.clip(1.0 - np.abs(coeffs[:, band]) ** 2, 0.0, 1.0)
    theta, gamma = _phases(coeffs, energies, band, path.dt, hbar)
    return EvolutionResult(path.times, states, coeffs, energies, band, leakage, theta, gamma,
                           path, hbar)


@dataclass
class PhaseSeries:
    dynamical: np.ndarray
    geometric: np.ndarray


def extract_phases(result: EvolutionResult, bundle: EigenBundle | None = None,
                   n: int | None = None) -> PhaseSeries:
    """Dynamical and geometric phase of band ``n`` along the run.

    With a bundle the eigenstates along the path are recomputed from its
    Hamiltonian builder; otherwise those recorded during the run are used.

    Raises
    ------
    NonAdiabatic
        If the leakage out of band ``n`` reaches 0.1.
    """
    n = result.band if n is None else n
    coeffs, energies = result.coefficients, result.energies
    if bundle is not None and bundle.hamiltonian_builder is not None and result.path is not None:
        V = bundle.states_at(result.path.samples)
        coeffs = np.einsum("kdm,kd->km", np.conj(V), result.states)
        H = np.array([bundle.hamiltonian_builder(R) for R in result.path.samples])
        energies = np.linalg.eigvalsh(H)
    leak = 1.0 - np.abs(coeffs[:, n]) ** 2
    if np.max(leak) >= LEAKAGE_LIMIT:
        raise NonAdiabatic(f"leakage {np.max(leak):.3f} out of band {n} is not adiabatic")
    dt = result.times[1] - result.times[0]
    theta, gamma = _phases(coeffs, energies, n, dt, result.hbar)
    return PhaseSeries(theta, gamma)


@dataclass
class RateReport:
    """Simulated ``d gamma/dt`` against the weak-value rate along the same path."""

    simulated_rate: np.ndarray
    weak_rate: np.ndarray
    max_deviation: float


def verify_rate_along_path(result: EvolutionResult, bundle: EigenBundle, n: int, phi) -> RateReport:
    """Differentiate the extracted geometric phase and compare with the weak-value rate."""
    phases = extract_phases(result, bundle, n)
    dt = result.times[1] - result.times[0]
    sim = np.gradient(phases.geometric, dt, edge_order=2)
    weak = gamma_rate_weak(bundle, n, phi, result.path)
    return RateReport(sim, weak, float(np.max(np.abs(sim - weak))))


def leakage_slope(speeds, max_leakages) -> float:
    """Least-squares slope of ``log(leakage)`` against ``log(speed)``."""
    x = np.log(np.asarray(speeds, dtype=float))
    y = np.log(np.asarray(max_leakages, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
