"""Weak-value split of the Berry connection under a chosen post-selection.

For a post-selected bra ``<phi|`` the connection of band ``n`` separates as

    A_self   = i <phi|d u_n> / <phi|u_n>
    A_mutual = -i sum_{m != n} <phi|u_m> <u_m|d u_n> / <phi|u_n>

``A_self`` absorbs every gauge change of ``|u_n>``; ``A_mutual`` and each of
its per-band terms is gauge invariant.  Points where ``<phi|u_n>`` (nearly)
vanishes are masked: their values are NaN and the boolean mask travels with
the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (NodeMasked, ParameterStateUndefined, PostSelectionOrthogonal)
from .geometry import (ConnectionField, CurvatureField, EigenBundle, GaugeFunction,
                       apply_gauge, connection_array)
from .grid import (ParameterGrid, ScalarField, VectorField, curl, gradient_array,
                   sample)

MASK_RELATIVE = 1e-8
MASK_ABSOLUTE = 1e-12


# -- post-selections ---------------------------------------------------------------

@dataclass(frozen=True)
class FixedBra:
    """The same bra at every grid point."""

    bra: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bra, dtype=complex)
        if b.ndim != 1 or not np.any(b):
            raise ValueError("a fixed bra must be a nonzero vector")
        object.__setattr__(self, "bra", b)

    def bras(self, bundle: EigenBundle) -> np.ndarray:
        if self.bra.shape[0] != bundle.dim:
            raise ValueError(f"bra has {self.bra.shape[0]} entries, states have {bundle.dim}")
        return np.broadcast_to(self.bra, bundle.grid.shape + self.bra.shape)

    def bra_gradients(self, bundle: EigenBundle) -> np.ndarray:
        return np.zeros(bundle.grid.shape + (bundle.grid.n_dims, bundle.dim), dtype=complex)


@dataclass(frozen=True)
class CustomField:
    """A bra per grid point, ``(*grid.shape, dim)``.

    ``gradients`` holds ``d_m |phi>`` as kets, ``(*grid.shape, N, dim)``; when
    omitted they are finite-differenced from ``bras``.
    """

    values: np.ndarray
    gradients: np.ndarray | None = None

    @classmethod
    def from_band(cls, bundle: EigenBundle, n: int) -> CustomField:
        """Post-select on the band itself, ``phi = u_n`` pointwise."""
        return cls(bundle.states[..., n], bundle.derivatives[..., n])

    def bras(self, bundle: EigenBundle) -> np.ndarray:
        if self.values.shape != bundle.grid.shape + (bundle.dim,):
            raise ValueError("custom bra field does not match the bundle")
        return np.asarray(self.values, dtype=complex)

    def bra_gradients(self, bundle: EigenBundle) -> np.ndarray:
        if self.gradients is not None:
            return np.asarray(self.gradients, dtype=complex)
        return gradient_array(np.asarray(self.values, dtype=complex), bundle.grid)


@dataclass(frozen=True)
class ParameterState:
    """Post-selection that reads one amplitude of the state, ``<R|u> = u[k(R)]``.

    ``index`` gives the component ``k`` at every grid point (an int applies
    everywhere).  The map must be supplied explicitly; a finite-dimensional
    model has no intrinsic position basis.

    ``gradients`` optionally carries ``d_m |R>`` as kets, needed only when the
    probe moves with ``R`` and its own derivative enters (the zero-curvature
    residual).  Use :meth:`fixed` for a probe that stays put and
    :meth:`tracking` for a probe that rides along a sampled position axis.
    """

    index: np.ndarray | int
    gradients: np.ndarray | None = field(default=None, compare=False)
    # (strides, position_spacing) for a probe that moves with R
    tracking_steps: tuple | None = field(default=None, compare=False)

    @classmethod
    def fixed(cls, k: int) -> ParameterState:
        return cls(int(k))

    @classmethod
    def tracking(cls, grid: ParameterGrid, index, strides, position_spacing) -> ParameterState:
        """Probe at component ``index[R]`` moving with ``R``.

        ``strides[m]`` is the component offset of one position step along
        parameter axis ``m`` and ``position_spacing[m]`` that step's length.
        The probe's derivative is the central-difference bra
        ``(<k + s| - <k - s|) / (2 dx)``.
        """
        index = np.asarray(index, dtype=int)
        return cls(index, None, (tuple(int(s) for s in strides),
                                 tuple(float(x) for x in position_spacing)))

    def indices(self, bundle: EigenBundle) -> np.ndarray:
        idx = np.broadcast_to(np.asarray(self.index, dtype=int), bundle.grid.shape)
        if np.any(idx < 0) or np.any(idx >= bundle.dim):
            raise ParameterStateUndefined("parameter-state index falls outside the state space")
        return idx

    def bras(self, bundle: EigenBundle) -> np.ndarray:
        idx = self.indices(bundle)
        out = np.zeros(bundle.grid.shape + (bundle.dim,), dtype=complex)
        np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
        return out

    def bra_gradients(self, bundle: EigenBundle) -> np.ndarray:
        N = bundle.grid.n_dims
        out = np.zeros(bundle.grid.shape + (N, bundle.dim), dtype=complex)
        if self.gradients is not None:
            return np.asarray(self.gradients, dtype=complex)
        if self.tracking_steps is not None:
            strides, dx = self.tracking_steps
            idx = self.indices(bundle)
            for m in range(N):
                s = strides[m]
                if s == 0:
                    continue
                hi, lo = idx + s, idx - s
                if np.any(hi >= bundle.dim) or np.any(lo < 0):
                    raise ParameterStateUndefined("tracking probe runs off the sampled positions")
                sub = out[..., m, :]
                np.put_along_axis(sub, hi[..., None], 0.5 / dx[m], axis=-1)
                np.put_along_axis(sub, lo[..., None], -0.5 / dx[m], axis=-1)
                out[..., m, :] = sub
        return out


PostSelection = FixedBra | CustomField | ParameterState


def with_bra_phase(phi, bundle: EigenBundle, zeta_phi) -> CustomField:
    """``<phi| -> exp(-i zeta) <phi|``, i.e. ``|phi> -> exp(i zeta)|phi>``."""
    zeta_phi = np.asarray(zeta_phi, dtype=float)
    bras = phi.bras(bundle)
    grads = phi.bra_gradients(bundle)
    ph = np.exp(1j * zeta_phi)
    gz = gradient_array(zeta_phi, bundle.grid)
    new_grads = ph[..., None, None] * (grads + 1j * gz[..., :, None] * bras[..., None, :])
    return CustomField(bras * ph[..., None], new_grads)


# -- decomposition -----------------------------------------------------------------

@dataclass
class WeakValueDecomposition:
    """``A_self``, ``A_mutual`` and the per-band mutual terms for one band.

    ``overlap`` is ``<phi|u_n>`` at every point; ``mask`` is True where it is
    too small for the ratios to be trusted.
    """

    a_self: ConnectionField
    a_mutual: ConnectionField
    a_mutual_components: dict
    mask: np.ndarray
    overlap: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.a_self.components + self.a_mutual.components


def overlap_mask(overlap: np.ndarray, bra_norm: np.ndarray | float = 1.0) -> np.ndarray:
    mag = np.abs(overlap)
    peak = float(np.max(mag)) if mag.size else 0.0
    return (mag < MASK_RELATIVE * peak) | (mag < MASK_ABSOLUTE * np.asarray(bra_norm))


def _projections(bundle: EigenBundle, n: int, phi):
    bras = phi.bras(bundle)
    V = bundle.states
    D = bundle.derivatives[..., n]
    ov = np.einsum("...d,...dk->...k", np.conj(bras), V)
    mask = overlap_mask(ov[..., n], np.linalg.norm(bras, axis=-1))
    if np.all(mask):
        raise PostSelectionOrthogonal(f"post-selection is orthogonal to band {n} at every grid point")
    phi_d = np.einsum("...d,...jd->...j", np.conj(bras), D)
    w = np.einsum("...dk,...jd->...kj", np.conj(V), D)
    return bras, ov, phi_d, w, mask


def _masked(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=complex)
    out[mask] = np.nan
    return out


def decompose(bundle: EigenBundle, n: int, phi) -> WeakValueDecomposition:
    """Split the connection of band ``n`` under post-selection ``phi``.

    Raises
    ------
    PostSelectionOrthogonal
        If ``<phi|u_n>`` is masked at every grid point.
    """
    bundle.check_band(n)
    _, ov, phi_d, w, mask = _projections(bundle, n, phi)
    grid = bundle.grid
    with np.errstate(divide="ignore", invalid="ignore"):
        ovn = np.where(mask, 1.0, ov[..., n])[..., None]
        a_s = 1j * phi_d / ovn
        comps = {}
        total = np.zeros(grid.shape + (grid.n_dims,), dtype=complex)
        for m in range(bundle.band_count):
            if m == n:
                continue
            c = -1j * ov[..., m, None] * w[..., m, :] / ovn
            total = total + c
            comps[m] = ConnectionField(VectorField(grid, _masked(c, mask)), n,
                                       "mutual_component", other=m, mask=mask)
    return WeakValueDecomposition(
        ConnectionField(VectorField(grid, _masked(a_s, mask)), n, "self", mask=mask),
        ConnectionField(VectorField(grid, _masked(total, mask)), n, "mutual", mask=mask),
        comps, mask, ov[..., n])


def a_self(bundle: EigenBundle, n: int, phi) -> ConnectionField:
    """``i <phi|d u_n> / <phi|u_n>``; complex, NaN on masked points."""
    return decompose(bundle, n, phi).a_self


def a_mutual(bundle: EigenBundle, n: int, phi) -> tuple[ConnectionField, dict]:
    """The gauge-invariant part and its per-band terms keyed by band index."""
    dec = decompose(bundle, n, phi)
    return dec.a_mutual, dec.a_mutual_components


def a_mutual_position(bundle: EigenBundle, n: int, probe: ParameterState,
                      strict: bool = False) -> ConnectionField:
    """Mutual part under a parameter-state probe, using amplitudes directly.

    Evaluates ``-i sum_{m != n} u_m(R) <u_m|d u_n> / u_n(R)`` with
    ``u_m(R)`` read off component ``k(R)``; no bra vectors are formed.

    Raises
    ------
    ParameterStateUndefined
        If ``probe`` is not a :class:`ParameterState` or indexes outside the
        state space.
    NodeMasked
        If ``u_n`` vanishes at every point, or at any point when ``strict``.
    """
    if not isinstance(probe, ParameterState):
        raise ParameterStateUndefined("a_mutual_position needs an explicit ParameterState")
    bundle.check_band(n)
    idx = probe.indices(bundle)
    V = bundle.states
    amp = np.take_along_axis(V, idx[..., None, None], axis=-2)[..., 0, :]
    un = amp[..., n]
    mask = overlap_mask(un)
    if np.all(mask) or (strict and np.any(mask)):
        raise NodeMasked(f"band {n} has a node at the probe position")
    D = bundle.derivatives[..., n]
    grid = bundle.grid
    total = np.zeros(grid.shape + (grid.n_dims,), dtype=complex)
    safe = np.where(mask, 1.0, un)[..., None]
    for m in range(bundle.band_count):
        if m == n:
            continue
        w_m = np.einsum("...d,...jd->...j", np.conj(V[..., m]), D)
        total = total + amp[..., m, None] * w_m
    total = -1j * total / safe
    return ConnectionField(VectorField(grid, _masked(total, mask)), n, "mutual", mask=mask)


# -- gauge covariance --------------------------------------------------------------

@dataclass
class GaugeCovarianceReport:
    """Worst deviations from the expected gauge behaviour over unmasked points."""

    self_shift_defect: float
    mutual_defect: float
    component_defects: dict
    tolerance: float = 1e-8

    @property
    def max_component_defect(self) -> float:
        return max(self.component_defects.values(), default=0.0)

    @property
    def passed(self) -> bool:
        worst = max(self.self_shift_defect, self.mutual_defect, self.max_component_defect)
        return bool(worst <= self.tolerance)


def _max_dev(a: np.ndarray, b: np.ndarray, keep: np.ndarray) -> float:
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(a[keep] - b[keep])))


def gauge_covariance_test(bundle: EigenBundle, n: int, phi, G: GaugeFunction,
                          tolerance: float = 1e-8) -> GaugeCovarianceReport:
    """Recompute the split after a gauge change and compare with the prediction.

    ``A_self`` must shift by ``-grad zeta_n`` and ``A_mutual`` (with each
    per-band term) must not move.  The bra picks up ``zeta_phi`` when the
    gauge function carries one.
    """
    before = decompose(bundle, n, phi)
    moved = apply_gauge(bundle, G)
    phi2 = phi
    if G.zeta_phi is not None and np.any(G.zeta_phi):
        phi2 = with_bra_phase(phi, bundle, G.zeta_phi)
    after = decompose(moved, n, phi2)
    keep = ~(before.mask | after.mask)
    grad_n = G.gradient()[..., n]
    expected = before.a_self.components - grad_n
    s = _max_dev(after.a_self.components, expected, keep)
    mp = _max_dev(after.a_mutual.components, before.a_mutual.components, keep)
    comps = {m: _max_dev(after.a_mutual_components[m].components, c.components, keep)
             for m, c in before.a_mutual_components.items()}
    return GaugeCovarianceReport(s, mp, comps, tolerance)


# -- rate along a trajectory -----------------------------------------------------

def _path_arrays(time_path, dt=None):
    samples = getattr(time_path, "samples", time_path)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if dt is None:
        dt = getattr(time_path, "dt")
    velocity = None
    if hasattr(time_path, "velocity"):
        velocity = time_path.velocity()
    if velocity is None:
        velocity = np.gradient(samples, dt, axis=0, edge_order=2)
    return samples, np.asarray(velocity, dtype=float)


def gamma_rate_weak(bundle: EigenBundle, n: int, phi, time_path, dt: float | None = None) -> np.ndarray:
    """Rate of the geometric phase, ``dR/dt . (A_self + A_mutual)``, along a path.

    ``time_path`` is a :class:`~gaugeweave.adiabatic.TimePath` or an array of
    samples (then ``dt`` is required).  Fields are interpolated
    multilinearly between grid nodes.  Returns the real part; the imaginary
    part of the sum is zero up to round-off wherever the point is unmasked.

    Raises
    ------
    PostSelectionOrthogonal
        If the path passes through a masked point.
    """
    dec = decompose(bundle, n, phi)
    samples, vel = _path_arrays(time_path, dt)
    tot = sample(dec.total, bundle.grid, samples)
    if np.any(~np.isfinite(tot)):
        raise PostSelectionOrthogonal("the path touches a point where <phi|u_n> vanishes")
    return np.real(np.sum(vel * tot, axis=1))


def gamma_rate_berry(bundle: EigenBundle, n: int, time_path, dt: float | None = None) -> np.ndarray:
    """``dR/dt . A_n`` with the plain Berry connection, for comparison."""
    samples, vel = _path_arrays(time_path, dt)
    A = sample(connection_array(bundle, n), bundle.grid, samples)
    return np.real(np.sum(vel * A, axis=1))


# -- curvature ---------------------------------------------------------------------

@dataclass
class CurvatureDecomposition:
    """Curvature of both parts of the split and the per-band consistency data.

    ``components[m]`` holds three estimates of the curvature of the ``m``-th
    mutual term, per plane: ``"curl"`` (finite-difference curl of the
    term), ``"printed"`` (the closed form with a minus sign in front of the
    gradient-of-log-ratio cross term) and ``"product_rule"`` (the same with
    the sign the product rule gives).  ``zero_condition_residual`` is
    ``|<d phi| x |d u_n> - <d phi|u_n> x <phi|d u_n>|`` and
    ``self_closed_form`` is the curvature of ``A_self`` assembled from
    derivative kets.  ``mask`` widens the overlap mask by the stencil reach.
    """

    b_self: CurvatureField
    b_mutual: CurvatureField
    components: dict
    b_mutual_printed: dict
    b_mutual_product_rule: dict
    zero_condition_residual: dict
    self_closed_form: dict
    mask: np.ndarray


def dilate_mask(mask: np.ndarray, grid: ParameterGrid, reach: int = 2) -> np.ndarray:
    out = mask.copy()
    for m in range(grid.n_dims):
        base = out.copy()
        for s in range(1, reach + 1):
            for sign in (1, -1):
                shifted = np.roll(base, sign * s, axis=m)
                if not grid.is_periodic(m):
                    sl = [slice(None)] * grid.n_dims
                    sl[m] = slice(0, s) if sign > 0 else slice(-s, None)
                    shifted[tuple(sl)] = False
                out |= shifted
    return out


def _cross(x: np.ndarray, y: np.ndarray, a: int, b: int) -> np.ndarray:
    return x[..., a] * y[..., b] - x[..., b] * y[..., a]


def curvature_decompose(bundle: EigenBundle, n: int, phi) -> CurvatureDecomposition:
    """Curvature of ``A_self`` and ``A_mutual`` plus the per-band closed forms.

    Raises
    ------
    PostSelectionOrthogonal
        If ``<phi|u_n>`` is masked everywhere.
    GridTooCoarse
        For one-dimensional grids.
    """
    dec = decompose(bundle, n, phi)
    grid = bundle.grid
    b_self = curl(dec.a_self.field)
    b_mut = curl(dec.a_mutual.field)
    mask = dilate_mask(dec.mask, grid)

    bras, ov, phi_d, w, _ = _projections(bundle, n, phi)
    dbras = phi.bra_gradients(bundle)
    V = bundle.states
    D = bundle.derivatives
    # d<phi|u_k> = <d phi|u_k> + <phi|d u_k>
    dov = (np.einsum("...jd,...dk->...kj", np.conj(dbras), V)
           + np.einsum("...d,...jdk->...kj", np.conj(bras), D))
    ovn = np.where(dec.mask, 1.0, ov[..., n])
    planes = list(b_self.keys())

    comps, printed_sum, product_sum = {}, {}, {}
    for p in planes:
        printed_sum[p] = np.zeros(grid.shape, dtype=complex)
        product_sum[p] = np.zeros(grid.shape, dtype=complex)
    for m in range(bundle.band_count):
        if m == n:
            continue
        r = ov[..., m] / ovn
        grad_r = (dov[..., m, :] * ovn[..., None] - ov[..., m, None] * dov[..., n, :]) / ovn[..., None] ** 2
        w_m = w[..., m, :]
        per = {"curl": {}, "printed": {}, "product_rule": {}}
        term_curl = curl(dec.a_mutual_components[m].field)
        for (a, b) in planes:
            # <d_a u_m|d_b u_n> - <d_b u_m|d_a u_n>
            C = (np.einsum("...d,...d->...", np.conj(D[..., a, :, m]), D[..., b, :, n])
                 - np.einsum("...d,...d->...", np.conj(D[..., b, :, m]), D[..., a, :, n]))
            cross = _cross(grad_r, w_m, a, b)
            printed = _masked(-1j * (r * C - cross), dec.mask)
            product = _masked(-1j * (r * C + cross), dec.mask)
            per["curl"][(a, b)] = term_curl[(a, b)]
            per["printed"][(a, b)] = ScalarField(grid, printed)
            per["product_rule"][(a, b)] = ScalarField(grid, product)
            printed_sum[(a, b)] = printed_sum[(a, b)] + printed
            product_sum[(a, b)] = product_sum[(a, b)] + product
        comps[m] = per

    residual, self_form = {}, {}
    Dn = D[..., n]
    phi_dun = phi_d
    dphi_un = np.einsum("...jd,...d->...j", np.conj(dbras), V[..., n])
    for (a, b) in planes:
        grad_grad = (np.einsum("...d,...d->...", np.conj(dbras[..., a, :]), Dn[..., b, :])
                     - np.einsum("...d,...d->...", np.conj(dbras[..., b, :]), Dn[..., a, :]))
        other = _cross(dphi_un, phi_dun, a, b)
        residual[(a, b)] = ScalarField(grid, np.where(dec.mask, np.nan, np.abs(grad_grad - other)))
        self_form[(a, b)] = ScalarField(grid, _masked(1j * (grad_grad / ovn - other / ovn ** 2), dec.mask))

    return CurvatureDecomposition(
        CurvatureField(b_self, n, "self", "curl", mask=mask),
        CurvatureField(b_mut, n, "mutual", "curl", mask=mask),
        comps,
        {p: ScalarField(grid, v) for p, v in printed_sum.items()},
        {p: ScalarField(grid, v) for p, v in product_sum.items()},
        residual, self_form, mask)
