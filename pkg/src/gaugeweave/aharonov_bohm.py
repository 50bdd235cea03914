"""A charged particle in a hard-wall well dragged around a thin solenoid.

Outside the solenoid the field vanishes, so the eigenstates of the well at
position ``R`` are field-free bound states times a line-integral phase,
``u_n(r, R) = exp(i g(r, R)) v_n(r - R)``.  This module provides the pieces
needed to check the resulting connections numerically:

* the solenoid potential and the exact line-integral phase ``g``;
* hard-wall bound states on a finite-difference grid;
* the mutual connection ``-i grad_R log v_n(r - R)`` and its contour integrals;
* a sampled moving-well state whose Berry connection is computed by
  quadrature and finite differences in ``R``;
* the transverse profile tables used for plotting.

Units default to ``hbar = m = q = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import (GridTooCoarse, InsideSolenoid, NodeMasked, NodeOnPath,
                     PathCrossesSolenoid)
from .geometry import ConnectionField, EigenBundle, build_bundle
from .grid import ParameterGrid, VectorField, trapezoid_path

NODE_MASK = 1e-6
MIN_INTERIOR_POINTS = 200
DEFAULT_INTERIOR_POINTS = 2047


# -- solenoid -------------------------------------------------------------------------

@dataclass(frozen=True)
class SolenoidConfig:
    """Infinitely thin-walled solenoid of radius ``radius`` carrying ``flux``."""

    flux: float
    center: tuple = (0.0, 0.0)
    radius: float = 0.3
    charge: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("solenoid radius must be positive")

    @property
    def coupling(self) -> float:
        """``q / hbar``."""
        return self.charge / self.hbar

    @property
    def phase(self) -> float:
        """Aharonov-Bohm phase ``q Phi / hbar`` of one winding."""
        return self.coupling * self.flux


def vector_potential(r, s: SolenoidConfig) -> np.ndarray:
    """``(Phi / 2 pi) (-(y - y0), x - x0) / |r - r0|^2`` for points outside the core.

    Accepts a single 2-vector or an array of shape ``(K, 2)``.

    Raises
    ------
    InsideSolenoid
        If any point lies at or inside the solenoid radius.
    """
    r = np.asarray(r, dtype=float)
    d = np.atleast_2d(r) - np.asarray(s.center, dtype=float)
    rho2 = np.sum(d * d, axis=1)
    if np.any(rho2 <= s.radius ** 2):
        raise InsideSolenoid("vector potential requested inside the solenoid")
    A = (s.flux / (2 * np.pi)) * np.stack([-d[:, 1], d[:, 0]], axis=1) / rho2[:, None]
    return A[0] if r.ndim == 1 else A


def _swept_angles(p: np.ndarray, q: np.ndarray, s: SolenoidConfig) -> np.ndarray:
    """Angle swept around the solenoid axis by straight segments ``p -> q``."""
    c = np.asarray(s.center, dtype=float)
    a, b = p - c, q - c
    seg = b - a
    L2 = np.sum(seg * seg, axis=-1)
    t = np.where(L2 > 0, -np.sum(a * seg, axis=-1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * seg
    if np.any(np.sum(closest * closest, axis=-1) <= s.radius ** 2):
        raise PathCrossesSolenoid("integration path enters the solenoid")
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def peierls_phase(r, R, s: SolenoidConfig, path=None) -> float:
    """``(q / hbar) * integral of A . dr'`` from ``R`` to ``r``.

    ``path`` is an optional polyline of intermediate waypoints (shape
    ``(K, 2)``, endpoints excluded); the default is the straight segment.
    The value depends only on how often the path winds around the
    solenoid, and each straight piece is integrated exactly via the angle it
    sweeps.

    Raises
    ------
    PathCrossesSolenoid
        If any piece of the path enters the solenoid.
    """
    pts = [np.asarray(R, dtype=float)]
    if path is not None:
        pts.extend(np.atleast_2d(np.asarray(path, dtype=float)))
    pts.append(np.asarray(r, dtype=float))
    pts = np.array(pts)
    if s.flux == 0:
        _swept_angles(pts[:-1], pts[1:], s)
        return 0.0
    swept = _swept_angles(pts[:-1], pts[1:], s)
    total = 0.0
    for a in swept:
        total += a
    return float(s.coupling * s.flux / (2 * np.pi) * total)


def peierls_phase_points(r: np.ndarray, R: np.ndarray, s: SolenoidConfig) -> np.ndarray:
    """Straight-segment ``g(r, R)`` for broadcastable arrays of 2-vectors."""
    r, R = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(R, dtype=float))
    return s.coupling * s.flux / (2 * np.pi) * _swept_angles(R, r, s)


# -- bound states ---------------------------------------------------------------------

@dataclass
class BoundState:
    """Real hard-wall bound state sampled on the well's interior points.

    ``x`` is measured from the well centre.  ``values`` are normalised so that
    ``sum(values**2) * spacing = 1`` and the first interior value is positive.
    """

    mode: int
    energy: float
    x: np.ndarray
    values: np.ndarray
    width: float
    nodes: np.ndarray
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def grid(self) -> ParameterGrid:
        return ParameterGrid((self.x.size,), (self.spacing,), (float(self.x[0]),), ("open",))

    @property
    def dims(self) -> int:
        return 1

    def _interp(self) -> CubicSpline:
        if self._spline is None:
            half = 0.5 * self.width
            xs = np.concatenate([[-half], self.x, [half]])
            vs = np.concatenate([[0.0], self.values, [0.0]])
            self._spline = CubicSpline(xs, vs)
        return self._spline

    def __call__(self, xi) -> np.ndarray:
        """``v_n`` at arbitrary offsets from the centre; zero outside the walls."""
        xi = np.asarray(xi, dtype=float)
        out = self._interp()(xi)
        return np.where(np.abs(xi) < 0.5 * self.width, out, 0.0)

    def derivative(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = self._interp()(xi, 1)
        return np.where(np.abs(xi) < 0.5 * self.width, out, 0.0)

    # uniform interface with ProductState: xi has shape (K, 1) or (K,)
    def value(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self(xi[..., 0] if xi.ndim > 1 else xi)

    def gradient(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        x = xi[..., 0] if xi.ndim > 1 else xi
        return self.derivative(x)[..., None]

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))


def hard_wall_energy(mode: int, width: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    return float(((mode + 1) * np.pi * hbar / width) ** 2 / (2 * mass))


def hard_wall_mode(mode: int, width: float, xi) -> np.ndarray:
    """Continuum ``sqrt(2/w) sin((n+1) pi (x + w/2) / w)``, zero outside."""
    xi = np.asarray(xi, dtype=float)
    v = np.sqrt(2 / width) * np.sin((mode + 1) * np.pi * (xi + 0.5 * width) / width)
    return np.where(np.abs(xi) < 0.5 * width, v, 0.0)


def _sign_change_roots(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    roots = []
    for j in range(v.size - 1):
        a, b = v[j], v[j + 1]
        if a == 0.0:
            roots.append(x[j])
        elif a * b < 0:
            roots.append(x[j] - a * (x[j + 1] - x[j]) / (b - a))
    return np.array(roots)


def bound_states_1d(width: float, n_states: int = 3, n_interior: int = DEFAULT_INTERIOR_POINTS,
                    mass: float = 1.0, hbar: float = 1.0) -> list[BoundState]:
    """Lowest ``n_states`` levels of an infinitely deep well of ``width``.

    The second-difference Hamiltonian on ``n_interior`` equally spaced
    interior points is tridiagonal and solved as such.

    Raises
    ------
    GridTooCoarse
        With fewer than 200 interior points.
    """
    if n_interior < MIN_INTERIOR_POINTS:
        raise GridTooCoarse(f"{n_interior} interior points; at least {MIN_INTERIOR_POINTS} needed")
    if not width > 0:
        raise ValueError("well width must be positive")
    dx = width / (n_interior + 1)
    x = -0.5 * width + dx * np.arange(1, n_interior + 1)
    t = hbar ** 2 / (2 * mass * dx ** 2)
    E, V = eigh_tridiagonal(np.full(n_interior, 2 * t), np.full(n_interior - 1, -t),
                            select="i", select_range=(0, n_states - 1))
    states = []
    for n in range(n_states):
        v = V[:, n] / np.sqrt(dx)
        if v[0] < 0:
            v = -v
        states.append(BoundState(n, float(E[n]), x, v, float(width), _sign_change_roots(x, v)))
    return states


@dataclass
class ProductState:
    """Separable well state ``v(xi) = prod_k v_k(xi_k)`` in several dimensions."""

    factors: tuple

    @property
    def dims(self) -> int:
        return len(self.factors)

    @property
    def width(self) -> float:
        return max(f.width for f in self.factors)

    def value(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.ones(xi.shape[:-1])
        for k, f in enumerate(self.factors):
            out = out * f(xi[..., k])
        return out

    def gradient(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        vals = [f(xi[..., k]) for k, f in enumerate(self.factors)]
        grads = []
        for k, f in enumerate(self.factors):
            g = f.derivative(xi[..., k])
            for j, v in enumerate(vals):
                if j != k:
                    g = g * v
            grads.append(g)
        return np.stack(grads, axis=-1)

    @property
    def peak(self) -> float:
        return float(np.prod([f.peak for f in self.factors]))


# -- mutual connection ----------------------------------------------------------------

def _log_derivative_4th(v: np.ndarray, dx: float) -> np.ndarray:
    # hard walls: odd reflection keeps the stencil exact for sampled sines
    p = np.concatenate([[-v[0]], [0.0], v, [0.0], [-v[-1]]])
    return (-p[4:] + 8 * p[3:-1] - 8 * p[1:-3] + p[:-4]) / (12 * dx)


def a_mp_closed_form(state: BoundState) -> ConnectionField:
    """``-i d_R log v_n(x - R)`` on the state's grid, as a function of ``x - R``.

    Equals ``+i v'/v``; purely imaginary for a real state.  The derivative
    uses a fourth-order stencil.  Points with ``|v| < 1e-6 max|v|`` are
    masked (NaN).
    """
    v = state.values
    dv = _log_derivative_4th(v, state.spacing)
    mask = np.abs(v) < NODE_MASK * state.peak
    safe = np.where(mask, 1.0, v)
    a = 1j * dv / safe
    a = np.where(mask, np.nan + 0j, a)
    return ConnectionField(VectorField(state.grid, a[:, None]), state.mode, "mutual", mask=mask)


def a_mp_at(state, xi) -> np.ndarray:
    """Mutual connection ``i grad v / v`` at offsets ``xi = r - R``, shape ``(K, d)``.

    Raises
    ------
    NodeMasked
        If ``|v| < 1e-6 max|v|`` at any requested offset.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1 and state.dims == 1:
        xi = xi[:, None]
    xi = np.atleast_2d(xi)
    v = state.value(xi)
    if np.any(np.abs(v) < NODE_MASK * state.peak):
        raise NodeMasked("mutual connection requested at a node of the bound state")
    return 1j * state.gradient(xi) / v[..., None]


def a_s_ab(state, s: SolenoidConfig, R, r) -> np.ndarray:
    """Self part ``(q/hbar) A(R) - A_mutual`` for a probe at ``r``.

    Raises
    ------
    InsideSolenoid
        If ``R`` is inside the solenoid.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    A = s.coupling * vector_potential(R, s)
    return A - a_mp_at(state, r - R)


CONTOUR_KINDS = ("vary_R_fixed_r", "vary_r_fixed_R")


def _offsets(kind: str, path: np.ndarray, anchor) -> np.ndarray:
    anchor = np.asarray(anchor, dtype=float)
    if kind == "vary_R_fixed_r":
        return anchor - path
    if kind == "vary_r_fixed_R":
        return path - anchor
    raise ValueError(f"contour kind must be one of {CONTOUR_KINDS}")


def _check_nodes(state, xi: np.ndarray) -> np.ndarray:
    v = state.value(xi)
    if np.any(np.abs(v) < NODE_MASK * state.peak) or np.any(v[1:] * v[:-1] <= 0):
        raise NodeOnPath("the contour meets a node of the bound state")
    return v


def _as_points(path, dims: int) -> np.ndarray:
    p = np.asarray(getattr(path, "points", path), dtype=float)
    if p.ndim == 1:
        p = p[:, None] if dims == 1 else p[None, :]
    return p


def contour_gamma_mp(kind: str, path, state, anchor) -> complex:
    """Integral of the mutual connection along an open or closed contour.

    ``kind="vary_R_fixed_r"``: the well moves along ``path`` while the probe
    sits at ``anchor``; the result is ``-i log[v(r - R_f) / v(r - R_s)]``.
    ``kind="vary_r_fixed_R"``: the probe moves along ``path`` with the well
    at ``anchor``; the result is ``-i log[v(r_s - R) / v(r_f - R)]``.
    Only the endpoints matter; the interior of the path is checked for nodes.

    Raises
    ------
    NodeOnPath
        If ``v`` vanishes or changes sign along the path.
    """
    pts = _as_points(path, state.dims)
    xi = _offsets(kind, pts, anchor)
    v = _check_nodes(state, xi)
    ratio = v[-1] / v[0] if kind == "vary_R_fixed_r" else v[0] / v[-1]
    return complex(-1j * np.log(ratio + 0j))


def contour_gamma_mp_quadrature(kind: str, path, state, anchor) -> complex:
    """Same integral by the trapezoidal rule on the sampled path."""
    pts = _as_points(path, state.dims)
    xi = _offsets(kind, pts, anchor)
    _check_nodes(state, xi)
    # both integrands equal i grad v / v at the offset, taken against d(path)
    return trapezoid_path(a_mp_at(state, xi), pts)


# -- loops ------------------------------------------------------------------------------

def circle_loop(center, radius: float, steps: int) -> np.ndarray:
    """Counter-clockwise circle, ``steps + 1`` points with the first repeated."""
    t = 2 * np.pi * np.arange(steps + 1) / steps
    pts = np.asarray(center, dtype=float) + radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    pts[-1] = pts[0]
    return pts


def square_loop(center, half_side: float, steps: int) -> np.ndarray:
    """Counter-clockwise square; ``steps`` must be divisible by 4."""
    if steps % 4:
        raise ValueError("square loops need a multiple of 4 steps")
    q = steps // 4
    s = np.linspace(-half_side, half_side, q + 1)[:-1]
    h = half_side
    sides = [np.stack([np.full(q, h), s], axis=1), np.stack([-s, np.full(q, h)], axis=1),
             np.stack([np.full(q, -h), -s], axis=1), np.stack([s, np.full(q, -h)], axis=1)]
    pts = np.vstack(sides + [sides[0][:1]]) + np.asarray(center, dtype=float)
    return pts


# -- sampled moving well ------------------------------------------------------------------

@dataclass
class MovingWell:
    """State ``exp(i g(r, R)) v(r - R)`` sampled on Gauss-Legendre nodes.

    The nodes ride with the well.  Derivatives with respect to ``R`` are taken
    at fixed ``r`` by central differences of step ``eps``.
    """

    state: ProductState
    solenoid: SolenoidConfig
    quad_points: int = 24
    eps: float = 1e-5
    _nodes: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x, w = np.polynomial.legendre.leggauss(self.quad_points)
        halves = [0.5 * f.width for f in self.state.factors]
        grids = np.meshgrid(*[h * x for h in halves], indexing="ij")
        wts = np.meshgrid(*[h * w for h in halves], indexing="ij")
        self._nodes = np.stack([g.ravel() for g in grids], axis=1)
        self._weights = np.prod(np.stack([g.ravel() for g in wts], axis=1), axis=1)

    def _amplitudes(self, r: np.ndarray, R: np.ndarray) -> np.ndarray:
        g = peierls_phase_points(r, R[:, None, :], self.solenoid)
        return np.exp(1j * g) * self.state.value(r - R[:, None, :])

    def connection(self, R) -> np.ndarray:
        """Berry connection ``i <u|d_R u> / <u|u>`` at each ``R``, shape ``(K, 2)``."""
        R = np.atleast_2d(np.asarray(R, dtype=float))
        r = R[:, None, :] + self._nodes[None, :, :]
        u = self._amplitudes(r, R)
        norm = np.sum(self._weights * np.abs(u) ** 2, axis=1)
        out = np.empty(R.shape, dtype=complex)
        for m in range(R.shape[1]):
            e = np.zeros(R.shape[1])
            e[m] = self.eps
            du = (self._amplitudes(r, R + e) - self._amplitudes(r, R - e)) / (2 * self.eps)
            out[:, m] = 1j * np.sum(self._weights * np.conj(u) * du, axis=1) / norm
        return out


def loop_berry_phase(well: MovingWell, loop: np.ndarray) -> float:
    """Trapezoidal ``closed integral of A_n . dR`` of the sampled well, unreduced."""
    A = well.connection(loop)
    return float(np.real(trapezoid_path(A, loop)))


# -- 1D moving-well bundle ------------------------------------------------------------------

def moving_well_bundle(width: float, n_interior: int = 1023, n_bands: int = 3,
                       margin: int = 2, mass: float = 1.0, hbar: float = 1.0):
    """Finite-difference well on a fixed position grid, displaced over three
    parameter points ``R in {-dx, 0, dx}``.

    Sites outside the well are decoupled at a high on-site energy.  The
    parameter spacing equals the position spacing, so displacing the well
    shifts its states by exactly one site.  Returns the bundle and the
    position coordinates of the sites.
    """
    if n_interior % 2 == 0:
        raise ValueError("use an odd number of interior points")
    dx = width / (n_interior + 1)
    half = (n_interior + 1) // 2
    n_sites = n_interior + 2 * (margin + 1)
    xs = dx * (np.arange(n_sites) - n_sites // 2)
    t = hbar ** 2 / (2 * mass * dx ** 2)
    outside = 10 * 4 * t
    site = np.arange(n_sites) - n_sites // 2

    def builder(R):
        shift = int(round(float(np.atleast_1d(R)[0]) / dx))
        inside = np.abs(site - shift) < half
        H = np.diag(np.where(inside, 2 * t, outside)).astype(complex)
        link = inside[:-1] & inside[1:]
        k = np.arange(n_sites - 1)[link]
        H[k, k + 1] = -t
        H[k + 1, k] = -t
        return H

    grid = ParameterGrid((3,), (dx,), (-dx,), ("open",))
    return build_bundle(builder, grid, bands=range(n_bands)), xs


# -- profile tables --------------------------------------------------------------------------

@dataclass
class ProfileTable:
    """Transverse profile of a bound state and its mutual connection.

    ``X = (2 m / hbar) x`` is the plotting coordinate.  ``windows`` lists the
    masked runs as ``(x_start, x_end, x_node)``.
    """

    mode: int
    x: np.ndarray
    X: np.ndarray
    v: np.ndarray
    a_re: np.ndarray
    a_im: np.ndarray
    masked: np.ndarray
    windows: list

    @property
    def max_real(self) -> float:
        keep = ~self.masked
        return float(np.max(np.abs(self.a_re[keep]))) if np.any(keep) else 0.0

    def rows(self):
        for j in range(self.x.size):
            yield (self.X[j], self.v[j], self.a_re[j], self.a_im[j], bool(self.masked[j]))


def profile_table(mode: int, width: float = 1.0, n_interior: int = DEFAULT_INTERIOR_POINTS,
                  mass: float = 1.0, hbar: float = 1.0) -> ProfileTable:
    """Bound state ``mode`` and ``A_mutual`` across the well.

    Besides the ``|v| < 1e-6 max|v|`` rule, the two samples bracketing each
    sign change of ``v`` are masked, so every node opens one window.
    """
    state = bound_states_1d(width, mode + 1, n_interior, mass, hbar)[mode]
    conn = a_mp_closed_form(state)
    a = conn.components[:, 0]
    v = state.values
    masked = conn.mask.copy()
    flip = v[:-1] * v[1:] <= 0
    masked[:-1] |= flip
    masked[1:] |= flip
    a = np.where(masked, np.nan + 0j, a)
    windows = []
    j = 0
    x = state.x
    while j < x.size:
        if masked[j]:
            k = j
            while k + 1 < x.size and masked[k + 1]:
                k += 1
            roots = _sign_change_roots(x[j:k + 1], v[j:k + 1])
            centre = float(roots[0]) if roots.size else 0.5 * (x[j] + x[k])
            windows.append((float(x[j]), float(x[k]), centre))
            j = k + 1
        else:
            j += 1
    X = (2 * mass / hbar) * x
    return ProfileTable(mode, x, X, v, a.real, a.imag, masked, windows)


def analytic_node_positions(mode: int, width: float) -> np.ndarray:
    """Interior nodes ``x = -w/2 + k w / (n + 1)``, ``k = 1..n``."""
    return -0.5 * width + width * np.arange(1, mode + 1) / (mode + 1)
