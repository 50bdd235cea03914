"""Dense complex linear algebra: inner products, a Hermitian eigensolver and
the reference phase convention for eigenvectors.

Everything here is written against stacked arrays so that a whole grid of
small Hamiltonians can be diagonalised in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, ZeroVector

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-8
# relative window inside which two magnitudes count as a tie for the pivot
_PIVOT_TIE = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (ascending), eigenvectors as columns and the smallest gap."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]


def inner(bra, ket) -> complex:
    """Return <bra|ket>, conjugating the first argument."""
    bra = np.asarray(bra)
    ket = np.asarray(ket)
    if bra.shape != ket.shape:
        raise DimensionMismatch(f"cannot pair bra of shape {bra.shape} with ket of shape {ket.shape}")
    return complex(np.vdot(bra, ket))


def hermiticity_defect(H) -> float:
    """Largest entrywise |H - H^dagger| over the last two axes."""
    H = np.asarray(H)
    if H.size == 0:
        return 0.0
    return float(np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))))


def _check_hermitian(H: np.ndarray) -> None:
    if H.ndim < 2 or H.shape[-1] != H.shape[-2] or H.shape[-1] < 1:
        raise DimensionMismatch(f"expected square matrices, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))))
    defect = hermiticity_defect(H)
    if defect > HERMITIAN_TOL * scale:
        raise NonHermitianInput(f"max |H - H^dagger| = {defect:.3e} exceeds {HERMITIAN_TOL:g} * {scale:.3g}")


def fix_gauge_columns(V: np.ndarray) -> np.ndarray:
    """Apply the reference phase convention to every column of ``V``.

    ``V`` has shape ``(..., dim, k)``.  Each column is rotated so that its
    largest-magnitude entry (lowest index among ties) is real and positive.
    Columns already in that form are returned untouched, which makes the
    operation idempotent bit for bit.
    """
    V = np.asarray(V, dtype=complex)
    mag = np.abs(V)
    peak = mag.max(axis=-2, keepdims=True)
    if np.any(peak == 0):
        raise ZeroVector("cannot fix the phase of a zero vector")
    candidates = mag >= peak * (1.0 - _PIVOT_TIE)
    pivot = np.argmax(candidates, axis=-2)[..., None, :]
    pv = np.take_along_axis(V, pivot, axis=-2)
    done = (pv.imag == 0) & (pv.real > 0)
    pmag = np.abs(pv)
    # real divisions: complex division underflows |pv|^2 for subnormal pivots
    phase = np.where(done, 1.0 + 0j, pv.real / pmag - 1j * (pv.imag / pmag))
    out = np.where(done, V, V * phase)
    np.put_along_axis(out, pivot, np.where(done, pv, pmag + 0j), axis=-2)
    return out


def fix_reference_gauge(v) -> np.ndarray:
    """Return ``exp(i alpha) v`` with its largest entry real and positive.

    >>> fix_reference_gauge([0, 1j])
    array([0.+0.j, 1.+0.j])
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise DimensionMismatch("fix_reference_gauge expects a single vector")
    return fix_gauge_columns(v[:, None])[:, 0]


def adjacent_gaps(E: np.ndarray) -> np.ndarray:
    """Per-band distance to the nearest other eigenvalue, shape like ``E``.

    A single-level system has an infinite gap.
    """
    E = np.asarray(E, dtype=float)
    gaps = np.full(E.shape, np.inf)
    if E.shape[-1] > 1:
        d = np.diff(E, axis=-1)
        gaps[..., :-1] = d
        gaps[..., 1:] = np.minimum(gaps[..., 1:], d)
    return gaps


def eig_hermitian_batch(H) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalise a stack of Hermitian matrices of shape ``(..., d, d)``.

    Returns ascending eigenvalues ``(..., d)`` and gauge-fixed eigenvectors
    ``(..., d, d)`` stored as columns.
    """
    H = np.asarray(H, dtype=complex)
    _check_hermitian(H)
    Hs = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    E, V = np.linalg.eigh(Hs)
    return E, fix_gauge_columns(V)


def eig_hermitian(H) -> EigenDecomposition:
    """Eigen-decomposition of a single Hermitian matrix.

    Raises
    ------
    NonHermitianInput
        If ``max |H - H^dagger|`` exceeds ``1e-12`` (scaled by ``max(1, max|H|)``).
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {H.shape}")
    E, V = eig_hermitian_batch(H)
    gap = float(np.min(np.diff(E))) if E.size > 1 else np.inf
    return EigenDecomposition(E, V, gap)


def spectral_norm(E: np.ndarray) -> np.ndarray:
    """||H|| from its eigenvalues (largest |E|), never below 1e-300."""
    return np.maximum(np.max(np.abs(E), axis=-1), 1e-300)
