"""Hamiltonian builders used by the tests, demos and the command line.

Each builder maps a parameter vector to a dense Hermitian matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def spin_half(R) -> np.ndarray:
    """Zeeman spin-1/2 in a field ``R`` (Cartesian): ``H = -R . sigma``.

    The lower band is the spin aligned with ``R``; its closed-loop phase is
    minus half the enclosed solid angle.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3,):
        raise DimensionMismatch("spin_half expects a 3-vector")
    return -(R[0] * SIGMA_X + R[1] * SIGMA_Y + R[2] * SIGMA_Z)


def unit_vector(theta, phi) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def spin_half_sphere(R) -> np.ndarray:
    """``spin_half`` on the unit sphere, parameterised by ``(theta, phi)``."""
    theta, phi = np.asarray(R, dtype=float)
    return spin_half(unit_vector(theta, phi))


def spin_half_lower_state(theta, phi) -> np.ndarray:
    """Closed-form lower eigenvector ``(cos(theta/2), sin(theta/2) e^{i phi})``.

    Broadcasts over array arguments; the spinor index is last.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    return np.stack([np.cos(theta / 2) + 0j, np.sin(theta / 2) * np.exp(1j * phi)], axis=-1)


def diag_two_level(R) -> np.ndarray:
    """``R_1 sigma_z``: constant eigenvectors, so every connection vanishes."""
    R = np.atleast_1d(np.asarray(R, dtype=float))
    return R[0] * SIGMA_Z


@dataclass(frozen=True)
class StencilModel:
    """Affine family ``H(R) = H0 + sum_m R_m H_m``."""

    h0: np.ndarray
    terms: tuple

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
            raise ConfigError("H0 must be a square matrix")
        terms = tuple(np.asarray(t, dtype=complex) for t in self.terms)
        if any(t.shape != h0.shape for t in terms):
            raise ConfigError("every H_m must match the shape of H0")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "terms", terms)

    @property
    def n_params(self) -> int:
        return len(self.terms)

    def __call__(self, R) -> np.ndarray:
        R = np.atleast_1d(np.asarray(R, dtype=float))
        if R.shape != (self.n_params,):
            raise DimensionMismatch(f"model takes {self.n_params} parameters, got {R.shape}")
        H = self.h0.copy()
        for r, Hm in zip(R, self.terms):
            H = H + r * Hm
        return H

    @classmethod
    def from_json(cls, doc: dict) -> StencilModel:
        """Read ``{"H0": M, "H": [M1, ...]}``; each matrix is a nested list of
        numbers or ``[re, im]`` pairs."""
        try:
            return cls(_matrix(doc["H0"]), tuple(_matrix(m) for m in doc["H"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad custom model: {exc}") from exc


def _matrix(rows) -> np.ndarray:
    def entry(x) -> complex:
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise ValueError("complex entries are [re, im] pairs")
            return complex(float(x[0]), float(x[1]))
        return complex(float(x))

    if not isinstance(rows, (list, tuple)) or not all(isinstance(r, (list, tuple)) for r in rows):
        raise ValueError("a matrix is a list of rows")
    return np.array([[entry(x) for x in row] for row in rows], dtype=complex)
