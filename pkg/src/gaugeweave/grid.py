"""Uniform parameter grids, finite-difference calculus on them, and the
R-space translation / momentum operators.

Fields are stored densely: a scalar field has ``grid.shape`` values and a
vector field carries a trailing axis with one entry per parameter direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridTooCoarse, OpenBoundaryUnsupported, PathOffGrid

PERIODIC = "periodic"
OPEN = "open"


@dataclass(frozen=True)
class ParameterGrid:
    """Regular grid over an N-dimensional parameter space.

    Point ``i`` along axis ``m`` sits at ``origin[m] + i * spacings[m]``.
    A periodic axis has period ``points[m] * spacings[m]``; the upper end is
    not stored.
    """

    points: tuple[int, ...]
    spacings: tuple[float, ...]
    origin: tuple[float, ...]
    boundary: tuple[str, ...]

    def __post_init__(self):
        n = len(self.points)
        if n == 0:
            raise ValueError("a grid needs at least one dimension")
        if not (len(self.spacings) == len(self.origin) == len(self.boundary) == n):
            raise ValueError("points, spacings, origin and boundary must have equal length")
        if any(p < 1 for p in self.points):
            raise ValueError("every axis needs at least one point")
        if any(not h > 0 for h in self.spacings):
            raise ValueError("grid spacings must be positive")
        if any(b not in (PERIODIC, OPEN) for b in self.boundary):
            raise ValueError(f"boundary must be '{OPEN}' or '{PERIODIC}'")

    @classmethod
    def from_bounds(cls, lower, upper, points, boundary=OPEN) -> ParameterGrid:
        """Build a grid spanning ``[lower, upper]`` on each axis.

        Open axes include both ends; periodic axes treat ``upper`` as the
        image of ``lower`` and leave it out.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        points = tuple(int(p) for p in np.atleast_1d(points))
        if isinstance(boundary, str):
            boundary = (boundary,) * len(points)
        boundary = tuple(boundary)
        spacings = []
        for lo, hi, n, b in zip(lower, upper, points, boundary):
            if b == PERIODIC:
                spacings.append((hi - lo) / n)
            else:
                spacings.append((hi - lo) / (n - 1) if n > 1 else 1.0)
        return cls(points, tuple(spacings), tuple(float(x) for x in lower), boundary)

    @property
    def n_dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def periods(self) -> np.ndarray:
        """Period per axis (``inf`` on open axes)."""
        return np.array([n * h if b == PERIODIC else np.inf
                         for n, h, b in zip(self.points, self.spacings, self.boundary)])

    def is_periodic(self, axis: int) -> bool:
        return self.boundary[axis] == PERIODIC

    def axis(self, m: int) -> np.ndarray:
        return self.origin[m] + self.spacings[m] * np.arange(self.points[m])

    def coords(self) -> np.ndarray:
        """Coordinates of every point, shape ``(*shape, n_dims)``."""
        mesh = np.meshgrid(*[self.axis(m) for m in range(self.n_dims)], indexing="ij")
        return np.stack(mesh, axis=-1)

    def point(self, index) -> np.ndarray:
        index = np.atleast_1d(index)
        return np.array([self.origin[m] + self.spacings[m] * index[m] for m in range(self.n_dims)])


@dataclass
class ScalarField:
    grid: ParameterGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")


@dataclass
class VectorField:
    """One complex (or real) value per parameter direction at every point."""

    grid: ParameterGrid
    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components)
        expected = self.grid.shape + (self.grid.n_dims,)
        if self.components.shape != expected:
            raise ValueError(f"vector field shape {self.components.shape}, expected {expected}")

    def component(self, m: int) -> ScalarField:
        return ScalarField(self.grid, self.components[..., m])

    def __add__(self, other: VectorField) -> VectorField:
        return VectorField(self.grid, self.components + other.components)

    def __sub__(self, other: VectorField) -> VectorField:
        return VectorField(self.grid, self.components - other.components)


@dataclass(frozen=True)
class PathContour:
    """Ordered path through parameter space.

    ``points`` are coordinates of shape ``(K, N)``.  Coordinates along
    periodic axes may be unwrapped (e.g. an azimuth running 0 -> 2 pi); a
    closed path must end on an image of its first point.  ``indices``, when
    present, pins each point to a grid node so no interpolation is needed.
    """

    points: np.ndarray
    closed: bool = False
    indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.shape[0] < 2:
            raise ValueError("a path needs at least two points")

    @classmethod
    def from_indices(cls, grid: ParameterGrid, indices, closed: bool = False) -> PathContour:
        """Path through grid nodes; a closed path repeats its first index last.

        Steps that wrap around a periodic axis are unwrapped so consecutive
        coordinates stay adjacent.
        """
        idx = np.atleast_2d(np.asarray(indices, dtype=int))
        if idx.shape[1] != grid.n_dims:
            idx = idx.T
        steps = np.diff(idx, axis=0)
        for m in range(grid.n_dims):
            if grid.is_periodic(m):
                n = grid.points[m]
                steps[:, m] = (steps[:, m] + n // 2) % n - n // 2
        unwrapped = np.vstack([idx[:1], idx[:1] + np.cumsum(steps, axis=0)])
        pts = np.asarray(grid.origin) + unwrapped * np.asarray(grid.spacings)
        return cls(pts, closed, idx % np.asarray(grid.points))

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def reversed(self) -> PathContour:
        idx = None if self.indices is None else self.indices[::-1].copy()
        return PathContour(self.points[::-1].copy(), self.closed, idx)


# -- finite differences ------------------------------------------------------

def derivative(values: np.ndarray, grid: ParameterGrid, m: int) -> np.ndarray:
    """Second-order derivative of ``values`` along grid axis ``m``.

    ``values`` may carry extra trailing axes (kets, components).  Central
    differences inside, wrap-around on periodic axes and second-order
    one-sided stencils at open ends.
    """
    n = grid.points[m]
    h = grid.spacings[m]
    if n < 3:
        raise GridTooCoarse(f"axis {m} has {n} points; at least 3 are needed to differentiate")
    f = np.moveaxis(np.asarray(values), m, 0)
    if grid.is_periodic(m):
        d = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * h)
    else:
        d = np.empty(f.shape, dtype=np.result_type(f, float))
        d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return np.moveaxis(d, 0, m)


def gradient_array(values: np.ndarray, grid: ParameterGrid) -> np.ndarray:
    """Stack of ``derivative`` along every axis, new axis inserted after the grid axes."""
    parts = [derivative(values, grid, m) for m in range(grid.n_dims)]
    return np.stack(parts, axis=grid.n_dims)


def grad_scalar(f: ScalarField) -> VectorField:
    return VectorField(f.grid, gradient_array(f.values, f.grid))


def curl_plane(F: VectorField, plane: tuple[int, int] = (0, 1)) -> ScalarField:
    """``d_a F_b - d_b F_a`` for the plane ``(a, b)``."""
    a, b = plane
    if F.grid.n_dims < 2:
        raise GridTooCoarse("curl needs at least two parameter dimensions")
    comp = F.components
    return ScalarField(F.grid, derivative(comp[..., b], F.grid, a) - derivative(comp[..., a], F.grid, b))


def curl_2d(F: VectorField, plane: tuple[int, int] = (0, 1)) -> ScalarField:
    return curl_plane(F, plane)


def curl(F: VectorField) -> dict[tuple[int, int], ScalarField]:
    """Curl on every independent plane ``a < b`` (three planes in 3D)."""
    N = F.grid.n_dims
    if N < 2:
        raise GridTooCoarse("curl needs at least two parameter dimensions")
    return {(a, b): curl_plane(F, (a, b)) for a in range(N) for b in range(a + 1, N)}


# -- R-space translation and momentum -----------------------------------------

def _require_periodic(grid: ParameterGrid, m: int) -> None:
    if not grid.is_periodic(m):
        raise OpenBoundaryUnsupported(
            f"axis {m} is open; translations are only unitary on periodic axes")


def _axis_operator(grid: ParameterGrid, m: int, op1d: np.ndarray) -> np.ndarray:
    mats = [np.eye(n) for n in grid.points]
    mats[m] = op1d
    out = mats[0]
    for mat in mats[1:]:
        out = np.kron(out, mat)
    return out


def translation_matrix(grid: ParameterGrid, m: int, steps: int) -> np.ndarray:
    """Permutation matrix with ``(T psi)(R) = psi(R - steps * h_m e_m)``.

    Acts on C-ordered flattened samples of the whole grid.
    """
    _require_periodic(grid, m)
    n = grid.points[m]
    i = np.arange(n)
    t1 = np.zeros((n, n))
    t1[i, (i - steps) % n] = 1.0
    return _axis_operator(grid, m, t1)


def momentum_matrix(grid: ParameterGrid, m: int, hbar: float = 1.0) -> np.ndarray:
    """Central-difference realisation of ``-i hbar d/dR_m`` on a periodic axis."""
    _require_periodic(grid, m)
    if grid.points[m] < 3:
        raise GridTooCoarse("the momentum stencil needs at least 3 points")
    h = grid.spacings[m]
    n = grid.points[m]
    i = np.arange(n)
    d = np.zeros((n, n))
    d[i, (i + 1) % n] += 1.0
    d[i, (i - 1) % n] -= 1.0
    p1 = (-1j * hbar / (2 * h)) * d
    return _axis_operator(grid, m, p1)


@dataclass
class HermiticityReport:
    max_asymmetry: list[float]
    unitary_defect: list[float]
    inner_product_defect: list[float] | None = None

    @property
    def exact(self) -> bool:
        return max(self.max_asymmetry) == 0.0 and max(self.unitary_defect) == 0.0


def check_momentum_hermitian(grid: ParameterGrid, n_random: int = 0, seed: int = 0,
                             hbar: float = 1.0) -> HermiticityReport:
    """Per-axis ``max|P - P^dagger|`` and ``max|T^dagger T - I|``.

    With ``n_random > 0`` the report also records, per axis, the largest
    ``|<f|P g> - <P f|g>|`` over that many random complex pairs.
    """
    asym, unit, ip = [], [], []
    rng = np.random.default_rng(seed)
    for m in range(grid.n_dims):
        P = momentum_matrix(grid, m, hbar)
        T = translation_matrix(grid, m, 1)
        asym.append(float(np.max(np.abs(P - P.conj().T))))
        unit.append(float(np.max(np.abs(T.T @ T - np.eye(T.shape[0])))))
        if n_random:
            worst = 0.0
            for _ in range(n_random):
                f = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
                g = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
                worst = max(worst, abs(np.vdot(f, P @ g) - np.vdot(P @ f, g)))
            ip.append(float(worst))
    return HermiticityReport(asym, unit, ip if n_random else None)


# -- sampling along paths ------------------------------------------------------

def _cell_weights(grid: ParameterGrid, points: np.ndarray):
    """Multilinear interpolation stencil: (corner indices, weights) per point."""
    pts = np.atleast_2d(points)
    K, N = pts.shape
    if N != grid.n_dims:
        raise PathOffGrid(f"path has {N} coordinates, grid has {grid.n_dims}")
    base = np.empty((K, N), dtype=int)
    frac = np.empty((K, N))
    for m in range(N):
        n, h, o = grid.points[m], grid.spacings[m], grid.origin[m]
        t = (pts[:, m] - o) / h
        if grid.is_periodic(m):
            t = np.mod(t, n)
            # snap round-off so nodes are hit exactly
            t = np.where(np.abs(t - np.round(t)) < 1e-9, np.round(t), t)
            t = np.mod(t, n)
            i0 = np.floor(t).astype(int)
            base[:, m] = i0
            frac[:, m] = t - i0
        else:
            t = np.where(np.abs(t - np.round(t)) < 1e-9, np.round(t), t)
            if np.any(t < 0) or np.any(t > n - 1):
                raise PathOffGrid(f"path leaves the grid along axis {m}")
            i0 = np.minimum(np.floor(t).astype(int), max(n - 2, 0))
            base[:, m] = i0
            frac[:, m] = t - i0
    corners, weights = [], []
    for bits in np.ndindex(*(2,) * N):
        bits = np.array(bits)
        idx = base + bits
        for m in range(N):
            if grid.is_periodic(m):
                idx[:, m] %= grid.points[m]
            else:
                idx[:, m] = np.minimum(idx[:, m], grid.points[m] - 1)
        w = np.prod(np.where(bits == 1, frac, 1 - frac), axis=1)
        corners.append(idx)
        weights.append(w)
    return corners, weights


def sample(values: np.ndarray, grid: ParameterGrid, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a gridded array (extra trailing axes allowed)."""
    values = np.asarray(values)
    corners, weights = _cell_weights(grid, points)
    out = 0
    for idx, w in zip(corners, weights):
        vals = values[tuple(idx.T)]
        out = out + w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
    return out


def path_values(values: np.ndarray, grid: ParameterGrid, path: PathContour) -> np.ndarray:
    if path.indices is not None:
        return np.asarray(values)[tuple(path.indices.T)]
    return sample(values, grid, path.points)


def _check_path(grid: ParameterGrid, path: PathContour) -> None:
    steps = np.abs(np.diff(path.points, axis=0))
    if np.any(steps > np.asarray(grid.spacings) * (1 + 1e-9)):
        raise PathOffGrid("consecutive path points must lie within one grid cell")
    if path.closed:
        gap = path.points[-1] - path.points[0]
        for m in range(grid.n_dims):
            period = grid.periods[m]
            g = gap[m] if not np.isfinite(period) else gap[m] - period * np.round(gap[m] / period)
            if abs(g) > 1e-9 * max(1.0, grid.spacings[m]):
                raise PathOffGrid("a closed path must end on an image of its first point")


def trapezoid_path(F_on_path: np.ndarray, points: np.ndarray) -> complex:
    """``sum 1/2 (F_k + F_{k+1}) . (R_{k+1} - R_k)`` in fixed index order."""
    F = np.asarray(F_on_path)
    dR = np.diff(np.asarray(points, dtype=float), axis=0)
    mids = 0.5 * (F[1:] + F[:-1])
    terms = np.sum(mids * dR, axis=1)
    total = 0j
    for t in terms:
        total += t
    return complex(total)


def line_integral(F: VectorField, path: PathContour) -> complex:
    """Trapezoidal line integral of a (complex) vector field along a path."""
    _check_path(F.grid, path)
    vals = path_values(F.components, F.grid, path)
    return trapezoid_path(vals, path.points)
