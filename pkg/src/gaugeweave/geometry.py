"""Berry connection, phase and curvature over a sampled eigen-bundle.

The bundle stores, at each grid point, the full eigenbasis of ``H(R)`` in the
reference gauge together with the finite-difference derivatives of those
kets.  Gauge transformations act on both covariantly, so quantities computed
after :func:`apply_gauge` differ from the originals by exactly the expected
``grad zeta`` terms instead of by a fresh discretisation error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import linalg
from .errors import DegenerateBand, GridTooCoarse, PathOffGrid, VanishingOverlap
from .grid import (ParameterGrid, PathContour, ScalarField, VectorField, curl,
                   gradient_array, line_integral, _check_path)

HamiltonianBuilder = Callable[[np.ndarray], np.ndarray]

OVERLAP_FLOOR = 1e-8


class ContinuityWarning(UserWarning):
    """Neighbouring eigenvectors overlap by less than 0.5 in magnitude."""


@dataclass(frozen=True)
class EigenBundle:
    """Eigensystems of ``H(R)`` on every point of a grid.

    Attributes
    ----------
    energies : ndarray, shape ``(*grid.shape, nb)``
    states : ndarray, shape ``(*grid.shape, dim, nb)``
        Eigenvectors as columns.
    derivatives : ndarray, shape ``(*grid.shape, N, dim, nb)``
        ``d_m |u_n>`` for every direction ``m`` and band ``n``.
    gaps : ndarray, shape ``(*grid.shape, nb)``
        Distance from each level to its nearest neighbour.
    norms : ndarray, shape ``grid.shape``
        ``||H(R)||``.
    """

    grid: ParameterGrid
    energies: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    gaps: np.ndarray
    norms: np.ndarray
    hamiltonian_builder: HamiltonianBuilder | None = field(default=None, compare=False)
    reference_gauge: bool = True

    @property
    def band_count(self) -> int:
        return self.states.shape[-1]

    @property
    def dim(self) -> int:
        return self.states.shape[-2]

    def band(self, n: int) -> np.ndarray:
        """Kets of band ``n``, shape ``(*grid.shape, dim)``."""
        return self.states[..., n]

    def check_band(self, n: int, tol: float = linalg.DEGENERACY_TOL) -> None:
        if not 0 <= n < self.band_count:
            raise IndexError(f"band {n} out of range for {self.band_count} bands")
        bad = self.gaps[..., n] < tol * self.norms
        if np.any(bad):
            point = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DegenerateBand(point, n, float(self.gaps[point + (n,)]))

    def states_at(self, points) -> np.ndarray:
        """Reference-gauge eigenvectors at arbitrary coordinates, ``(K, dim, nb)``."""
        if self.hamiltonian_builder is None:
            raise PathOffGrid("bundle has no Hamiltonian builder; off-grid points unavailable")
        pts = np.atleast_2d(points)
        H = np.array([self.hamiltonian_builder(p) for p in pts])
        _, V = linalg.eig_hermitian_batch(H)
        return V


def _stitch(V: np.ndarray, n_grid: int, watch=None) -> None:
    """Sign-flip eigenvectors in place so neighbours overlap positively.

    Walks axis 0 along the line where all later indices are zero, then fans
    out along axis 1, axis 2, ...; each point is compared with its already
    visited predecessor along the last axis on which its index is non-zero.
    Only bands listed in ``watch`` (all by default) can raise the warning.
    """
    for k in range(n_grid):
        n = V.shape[k]
        sel_rest = (0,) * (n_grid - k - 1)
        for j in range(1, n):
            cur_idx = (slice(None),) * k + (j,) + sel_rest
            prev_idx = (slice(None),) * k + (j - 1,) + sel_rest
            cur = V[cur_idx]
            prev = V[prev_idx]
            ov = np.sum(np.conj(prev) * cur, axis=-2)
            weak = np.abs(ov) < 0.5
            if watch is not None:
                weak = weak[..., list(watch)]
            if np.any(weak):
                warnings.warn("eigenvectors change abruptly between neighbouring grid points",
                              ContinuityWarning, stacklevel=3)
            flip = (ov.real < 0) & (np.abs(ov.real) >= np.abs(ov.imag))
            if np.any(flip):
                V[cur_idx] = np.where(flip[..., None, :], -cur, cur)


def _project_derivatives(V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Remove ``Re<u|d u>`` so derivatives respect ``<u|u> = 1``."""
    re = np.real(np.einsum("...dn,...mdn->...mn", np.conj(V), D))
    return D - re[..., None, :] * V[..., None, :, :]


def bundle_from_states(grid: ParameterGrid, states: np.ndarray, energies: np.ndarray | None = None,
                       builder: HamiltonianBuilder | None = None) -> EigenBundle:
    """Wrap precomputed orthonormal kets ``(*shape, dim, nb)`` as a bundle."""
    states = np.asarray(states, dtype=complex)
    if energies is None:
        energies = np.zeros(states.shape[:-2] + (states.shape[-1],))
    D = _project_derivatives(states, gradient_array(states, grid))
    gaps = linalg.adjacent_gaps(energies)
    norms = linalg.spectral_norm(energies) if np.any(energies) else np.ones(grid.shape)
    return EigenBundle(grid, np.asarray(energies, dtype=float), states, D, gaps, norms, builder)


def build_bundle(hamiltonian_builder: HamiltonianBuilder, grid: ParameterGrid,
                 bands=None, stitch: bool = True) -> EigenBundle:
    """Diagonalise ``H(R)`` on every grid point.

    Parameters
    ----------
    hamiltonian_builder
        Callable mapping a coordinate vector to a Hermitian matrix.
    grid
        Parameter grid; every axis needs at least 3 points.
    bands
        Bands that must stay non-degenerate everywhere (all by default).
    stitch
        Flip signs of eigenvectors that come out anti-aligned with their
        neighbour.

    Raises
    ------
    DegenerateBand
        If a requested band's gap falls below ``1e-8 * ||H||`` anywhere.
    NonHermitianInput
        If the builder returns a non-Hermitian matrix.
    """
    coords = grid.coords().reshape(-1, grid.n_dims)
    H = np.array([np.asarray(hamiltonian_builder(R), dtype=complex) for R in coords])
    E, V = linalg.eig_hermitian_batch(H)
    E = E.reshape(grid.shape + E.shape[-1:])
    V = V.reshape(grid.shape + V.shape[-2:])
    gaps = linalg.adjacent_gaps(E)
    norms = linalg.spectral_norm(E)
    nb = E.shape[-1]
    bands = range(nb) if bands is None else list(bands)
    for n in bands:
        bad = gaps[..., n] < linalg.DEGENERACY_TOL * norms
        if np.any(bad):
            point = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DegenerateBand(point, n, float(gaps[point + (n,)]))
    if stitch:
        _stitch(V, grid.n_dims, bands)
    D = _project_derivatives(V, gradient_array(V, grid))
    return EigenBundle(grid, E, V, D, gaps, norms, hamiltonian_builder)


# -- gauge transformations -------------------------------------------------------

@dataclass
class GaugeFunction:
    """Phases ``zeta_m(R)`` (radians) for each band, plus an optional bra phase.

    ``zeta`` has shape ``(*grid.shape, nb)``; untransformed bands carry zeros.
    """

    grid: ParameterGrid
    zeta: np.ndarray
    zeta_phi: np.ndarray | None = None

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.zeta.shape[:-1] != self.grid.shape:
            raise ValueError("zeta must have shape (*grid.shape, n_bands)")
        if self.zeta_phi is not None:
            self.zeta_phi = np.asarray(self.zeta_phi, dtype=float)

    @classmethod
    def single_band(cls, grid: ParameterGrid, n_bands: int, band: int, values) -> GaugeFunction:
        zeta = np.zeros(grid.shape + (n_bands,))
        zeta[..., band] = values
        return cls(grid, zeta)

    @property
    def is_identity(self) -> bool:
        return not np.any(self.zeta)

    def gradient(self) -> np.ndarray:
        """``grad zeta_m`` with the grid's own stencil, ``(*shape, N, nb)``."""
        return gradient_array(self.zeta, self.grid)


def smooth_random_field(grid: ParameterGrid, rng: np.random.Generator, amplitude: float = np.pi,
                        n_modes: int = 3) -> np.ndarray:
    """Band-limited random real field with ``max |f| <= amplitude``.

    Periodic axes only get integer winding wave numbers so the field stays
    single valued.
    """
    X = grid.coords()
    f = np.zeros(grid.shape)
    for _ in range(n_modes):
        phase = rng.uniform(0, 2 * np.pi)
        arg = np.full(grid.shape, phase)
        for m in range(grid.n_dims):
            if grid.is_periodic(m):
                k = 2 * np.pi * rng.integers(-2, 3) / grid.periods[m]
            else:
                extent = max(grid.spacings[m] * (grid.points[m] - 1), 1e-12)
                k = rng.uniform(-2.0, 2.0) * np.pi / extent
            arg = arg + k * X[..., m]
        f += rng.uniform(0.2, 1.0) * np.cos(arg)
    peak = np.max(np.abs(f))
    if peak > 0:
        f *= amplitude * rng.uniform(0.3, 1.0) / peak
    return f


def random_gauge(grid: ParameterGrid, n_bands: int, rng: np.random.Generator,
                 amplitude: float = np.pi, with_bra: bool = True) -> GaugeFunction:
    zeta = np.stack([smooth_random_field(grid, rng, amplitude) for _ in range(n_bands)], axis=-1)
    zphi = smooth_random_field(grid, rng, amplitude) if with_bra else None
    return GaugeFunction(grid, zeta, zphi)


def apply_gauge(bundle: EigenBundle, G: GaugeFunction) -> EigenBundle:
    """Return the bundle with ``|u_m> -> exp(i zeta_m) |u_m>``.

    Derivative kets follow the product rule with ``grad zeta`` taken on the
    grid, so connections shift by exactly ``-grad zeta``.
    """
    if G.grid.shape != bundle.grid.shape:
        raise ValueError("gauge function lives on a different grid")
    if G.is_identity:
        return bundle
    phase = np.exp(1j * G.zeta)
    gz = G.gradient()
    V = bundle.states
    states = V * phase[..., None, :]
    D = bundle.derivatives + 1j * gz[..., :, None, :] * V[..., None, :, :]
    D = D * phase[..., None, None, :]
    return replace(bundle, states=states, derivatives=D, reference_gauge=False)


# -- connection, phase, curvature -----------------------------------------------

@dataclass
class ConnectionField:
    """A complex vector potential over the grid.

    ``kind`` is one of ``full``, ``self``, ``mutual`` or ``mutual_component``
    (then ``other`` names the projected band).  ``mask`` marks points where
    the field is undefined.
    """

    field: VectorField
    band: int
    kind: str = "full"
    other: int | None = None
    mask: np.ndarray | None = None

    @property
    def grid(self) -> ParameterGrid:
        return self.field.grid

    @property
    def components(self) -> np.ndarray:
        return self.field.components


@dataclass
class CurvatureField:
    planes: dict
    band: int
    kind: str = "full"
    method: str = "curl"
    other: int | None = None
    mask: np.ndarray | None = None
    flux: dict | None = None

    def plane(self, a: int = 0, b: int = 1) -> ScalarField:
        return self.planes[(a, b)]


def wrap_phase(x):
    """Reduce an angle to ``(-pi, pi]``."""
    y = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)
    return float(y) if np.ndim(y) == 0 else y


def phase_distance(a, b) -> float:
    """Distance between two angles modulo 2 pi."""
    return float(abs(wrap_phase(np.asarray(a) - np.asarray(b))))


def connection_array(bundle: EigenBundle, n: int) -> np.ndarray:
    u = bundle.states[..., n]
    du = bundle.derivatives[..., n]
    return 1j * np.einsum("...d,...md->...m", np.conj(u), du)


def berry_connection(bundle: EigenBundle, n: int) -> ConnectionField:
    """``A_n = i <u_n | d_m u_n>`` at every grid point."""
    bundle.check_band(n)
    return ConnectionField(VectorField(bundle.grid, connection_array(bundle, n)), n, "full")


def berry_phase_line(conn: ConnectionField, path: PathContour) -> float:
    """Real part of the trapezoidal line integral; wrapped when closed."""
    val = line_integral(conn.field, path).real
    return wrap_phase(val) if path.closed else float(val)


def _path_states(bundle: EigenBundle, n: int, path: PathContour) -> np.ndarray:
    if path.indices is not None:
        return bundle.states[tuple(path.indices.T)][..., n]
    return bundle.states_at(path.points)[..., n]


def overlap_phase(kets: np.ndarray, closed: bool) -> float:
    """``-arg prod_k <u_k|u_{k+1}>`` over a sequence of kets ``(K, dim)``.

    For closed sequences the last ket is taken to coincide with the first.
    """
    if closed:
        kets = kets[:-1]
        nxt = np.roll(kets, -1, axis=0)
    else:
        nxt = kets[1:]
        kets = kets[:-1]
    ov = np.sum(np.conj(kets) * nxt, axis=-1)
    mags = np.abs(ov)
    if np.any(mags < OVERLAP_FLOOR):
        k = int(np.argmin(mags))
        raise VanishingOverlap(f"overlap {mags[k]:.2e} between path points {k} and {k + 1}")
    prod = 1.0 + 0j
    for z in ov / mags:
        prod *= z
    return wrap_phase(-np.angle(prod))


def berry_phase_wilson(bundle: EigenBundle, n: int, path: PathContour) -> float:
    """Berry phase from the discrete overlap product along ``path``.

    Invariant under any per-point phase change of the kets on closed paths.
    """
    bundle.check_band(n)
    return overlap_phase(_path_states(bundle, n, path), path.closed)


def _dual_grid(grid: ParameterGrid, plane: tuple[int, int]) -> ParameterGrid:
    pts, org = list(grid.points), list(grid.origin)
    for m in plane:
        if not grid.is_periodic(m):
            pts[m] -= 1
        org[m] += 0.5 * grid.spacings[m]
    return ParameterGrid(tuple(pts), grid.spacings, tuple(org), grid.boundary)


def _links(u: np.ndarray, grid: ParameterGrid, m: int) -> np.ndarray:
    """``<u(R)|u(R + h e_m)>``; periodic axes wrap, open axes lose one row."""
    nxt = np.roll(u, -1, axis=m)
    ov = np.sum(np.conj(u) * nxt, axis=-1)
    if not grid.is_periodic(m):
        ov = np.take(ov, np.arange(grid.points[m] - 1), axis=m)
    return ov


def plaquette_flux(bundle: EigenBundle, n: int, plane: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Berry flux through each grid cell of ``plane`` from four-link products."""
    a, b = plane
    grid = bundle.grid
    for m in plane:
        if grid.points[m] < 2:
            raise GridTooCoarse("plaquettes need two points per axis")
    u = bundle.states[..., n]
    ua = _links(u, grid, a)
    ub = _links(u, grid, b)
    na = grid.points[a] - (0 if grid.is_periodic(a) else 1)
    nb = grid.points[b] - (0 if grid.is_periodic(b) else 1)
    # link a at (R), link b at (R + e_a), link a at (R + e_b) reversed, link b at (R) reversed
    Ua = np.take(ua, np.arange(nb), axis=b)
    Ub = np.take(ub, np.arange(na), axis=a)
    Ub_shift = np.take(ub, (np.arange(na) + 1) % grid.points[a], axis=a)
    Ua_shift = np.take(ua, (np.arange(nb) + 1) % grid.points[b], axis=b)
    loop = Ua * Ub_shift * np.conj(Ua_shift) * np.conj(Ub)
    if np.any(np.abs(loop) < OVERLAP_FLOOR ** 4):
        raise VanishingOverlap("a plaquette contains orthogonal neighbouring states")
    return -np.angle(loop)


def berry_curvature(bundle: EigenBundle, n: int, method: str = "curl") -> CurvatureField:
    """Berry curvature on every plane.

    ``method="curl"`` differentiates the connection on the grid nodes;
    ``method="plaquette"`` returns flux per cell area on the dual grid of
    cell centres and keeps the raw fluxes in ``.flux``.
    """
    bundle.check_band(n)
    grid = bundle.grid
    if grid.n_dims < 2:
        raise GridTooCoarse("curvature needs at least two parameter dimensions")
    if method == "curl":
        planes = curl(berry_connection(bundle, n).field)
        return CurvatureField(planes, n, "full", "curl")
    if method != "plaquette":
        raise ValueError(f"unknown curvature method {method!r}")
    planes, fluxes = {}, {}
    for a in range(grid.n_dims):
        for b in range(a + 1, grid.n_dims):
            F = plaquette_flux(bundle, n, (a, b))
            fluxes[(a, b)] = F
            planes[(a, b)] = ScalarField(_dual_grid(grid, (a, b)),
                                         F / (grid.spacings[a] * grid.spacings[b]))
    return CurvatureField(planes, n, "full", "plaquette", flux=fluxes)


def chern_number(bundle: EigenBundle, n: int, plane: tuple[int, int] = (0, 1)) -> tuple[float, float]:
    """Total plaquette flux over ``plane`` and the same divided by 2 pi.

    On a grid that closes into a surface the flux is an integer multiple of
    2 pi up to round-off.
    """
    F = plaquette_flux(bundle, n, plane)
    total = 0.0
    for x in F.ravel():
        total += x
    return float(total), float(total / (2 * np.pi))
