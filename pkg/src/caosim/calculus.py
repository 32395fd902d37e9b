"""Discrete differential operators.

Horizontal derivatives are exact Fourier multipliers. Vertical operators
use second-order finite differences on the uniform nodes. The diffusion
operator is written in flux form with half cells at the two boundary
nodes, which makes it a summation-by-parts operator for the trapezoid
inner product: the discrete energy identity holds to rounding.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .domain import Field3D, SurfaceField, VerticalGrid, broadcast_levels, to_spectral

_LEVEL_AXIS = 1


def _surface_like(f, data):
    return f.with_data(data, spectral=True)


def grad_h(f):
    """Horizontal gradient of a scalar field; returns a 2-component field."""
    g = to_spectral(f)
    if g.ncomp != 1:
        raise ValueError("grad_h expects a scalar field")
    hg = g.hgrid
    return _surface_like(g, np.concatenate([1j * hg.kx * g.data, 1j * hg.ky * g.data]))


def div_h(v):
    """Horizontal divergence of a 2-component field."""
    g = to_spectral(v)
    if g.ncomp != 2:
        raise ValueError("div_h expects a 2-component field")
    hg = g.hgrid
    return _surface_like(g, (1j * hg.kx * g.data[0] + 1j * hg.ky * g.data[1])[None])


def laplace_h(f):
    g = to_spectral(f)
    return _surface_like(g, -g.hgrid.k2 * g.data)


def curl_h(v):
    """Scalar horizontal curl dv2/dx - dv1/dy."""
    g = to_spectral(v)
    hg = g.hgrid
    return _surface_like(g, (1j * hg.kx * g.data[1] - 1j * hg.ky * g.data[0])[None])


def d_vertical(f: Field3D) -> Field3D:
    """Vertical derivative: centred inside, one-sided second order at the ends."""
    return f.with_data(np.gradient(f.data, f.vgrid.h, axis=_LEVEL_AXIS, edge_order=2))


def d2_vertical(f: Field3D) -> Field3D:
    """Second vertical derivative (3-point inside, 4-point one-sided at the ends)."""
    d = f.data
    h2 = f.vgrid.h**2
    out = np.empty_like(d)
    out[:, 1:-1] = (d[:, 2:] - 2 * d[:, 1:-1] + d[:, :-2]) / h2
    if f.vgrid.nz >= 4:
        out[:, 0] = (2 * d[:, 0] - 5 * d[:, 1] + 4 * d[:, 2] - d[:, 3]) / h2
        out[:, -1] = (2 * d[:, -1] - 5 * d[:, -2] + 4 * d[:, -3] - d[:, -4]) / h2
    else:
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, -2]
    return f.with_data(out)


def sbp_derivative(data: np.ndarray, vgrid: VerticalGrid) -> np.ndarray:
    """First derivative D = H^{-1} Q with Q + Q^T = diag(-1, 0, ..., 0, 1).

    Used by the energy-conserving advection: for the trapezoid inner
    product <D u, v> + <u, D v> = [u v] at the end points.
    """
    h = vgrid.h
    out = np.empty_like(data)
    out[:, 1:-1] = (data[:, 2:] - data[:, :-2]) / (2 * h)
    out[:, 0] = (data[:, 1] - data[:, 0]) / h
    out[:, -1] = (data[:, -1] - data[:, -2]) / h
    return out


class VerticalOperator:
    """Flux-form vertical diffusion d/dxi (a(xi) d/dxi) with Neumann closure.

    ``a`` is 1 in the ocean and p^2 in the atmosphere. With weights
    H = diag(trapezoid weights) the discrete operator reads
    ``H L v = K v + e_top F_top - e_bottom F_bottom`` where K is symmetric
    negative semidefinite and F are boundary fluxes a * dv/dxi.
    """

    def __init__(self, vgrid: VerticalGrid):
        self.vgrid = vgrid
        n, h = vgrid.nz, vgrid.h
        a = vgrid.half_diffusivity
        K = np.zeros((n, n))
        for i in range(n - 1):
            c = a[i] / h
            K[i, i] -= c
            K[i + 1, i + 1] -= c
            K[i, i + 1] += c
            K[i + 1, i] += c
        self.K = K
        self.weights = vgrid.weights
        self.a_bottom = float(vgrid.diffusivity(vgrid.nodes[0]))
        self.a_top = float(vgrid.diffusivity(vgrid.nodes[-1]))

    def flux(self, dbottom=0.0, dtop=0.0):
        """Convert boundary derivative data to fluxes a * dv/dxi."""
        return self.a_bottom * _surface_data(dbottom), self.a_top * _surface_data(dtop)

    def weighted_apply(self, data: np.ndarray, flux_bottom=0.0, flux_top=0.0) -> np.ndarray:
        """H L v for data of shape (ncomp, nz, ...)."""
        a = self.vgrid.half_diffusivity.reshape((1, -1) + (1,) * (data.ndim - 2))
        jump = a * (data[:, 1:] - data[:, :-1]) / self.vgrid.h
        out = np.zeros_like(data)
        out[:, :-1] += jump
        out[:, 1:] -= jump
        out[:, -1] += flux_top
        out[:, 0] -= flux_bottom
        return out

    def apply(self, data: np.ndarray, flux_bottom=0.0, flux_top=0.0) -> np.ndarray:
        w = self.weights.reshape((1, -1) + (1,) * (data.ndim - 2))
        return self.weighted_apply(data, flux_bottom, flux_top) / w

    def dissipation_density(self, data: np.ndarray) -> np.ndarray:
        """sum over half nodes of a |jump|^2 / h, per horizontal point/mode."""
        a = self.vgrid.half_diffusivity.reshape((1, -1) + (1,) * (data.ndim - 2))
        jump = data[:, 1:] - data[:, :-1]
        return np.sum(a * np.abs(jump) ** 2 / self.vgrid.h, axis=(0, 1))

    @property
    def b_average_factor(self) -> float:
        return 1.0 / self.vgrid.length


@lru_cache(maxsize=64)
def vertical_operator(vgrid: VerticalGrid) -> VerticalOperator:
    return VerticalOperator(vgrid)


def _surface_data(d):
    if isinstance(d, SurfaceField):
        return d.data
    return d


def _boundary_data(f: Field3D, d):
    if isinstance(d, SurfaceField):
        return to_spectral(d).data if f.spectral else d.values()
    if f.spectral and np.ndim(d) == 0:
        # a constant in physical space lives in the mean mode only
        out = np.zeros((f.ncomp,) + f.hgrid.shape, dtype=complex)
        out[:, 0, 0] = d
        return out
    return d


def _flux_pair(f: Field3D, dbottom, dtop):
    return vertical_operator(f.vgrid).flux(_boundary_data(f, dbottom), _boundary_data(f, dtop))


def vertical_diffusion(f: Field3D, dbottom=0.0, dtop=0.0) -> Field3D:
    """d/dxi (a d f/dxi) with Neumann data dbottom, dtop for df/dxi."""
    fb, ft = _flux_pair(f, dbottom, dtop)
    return f.with_data(vertical_operator(f.vgrid).apply(f.data, fb, ft))


def delta_a(v: Field3D, dbottom=0.0, dtop=0.0) -> Field3D:
    """Atmospheric operator Delta_H + d/dp (p^2 d/dp) in flux form."""
    g = to_spectral(v)
    return laplace_h(g) + vertical_diffusion(g, dbottom, dtop)


def laplacian(v: Field3D, dbottom=0.0, dtop=0.0) -> Field3D:
    """Delta_H plus the subdomain's vertical diffusion (Delta or Delta^a)."""
    return delta_a(v, dbottom, dtop)


def vertical_average(f: Field3D) -> SurfaceField:
    w = f.vgrid.weights.reshape((1, -1, 1, 1))
    avg = np.sum(w * f.data, axis=_LEVEL_AXIS) / f.vgrid.length
    return SurfaceField(f.hgrid, avg, f.spectral)


def fluctuation(f: Field3D) -> Field3D:
    avg = vertical_average(f).data
    return f.with_data(f.data - broadcast_levels(avg, f.vgrid.nz))


def extend(s: SurfaceField, like: Field3D) -> Field3D:
    """Constant-in-depth extension of a surface field onto ``like``'s grid."""
    data = to_spectral(s).data if like.spectral else s.values()
    return like.with_data(np.array(broadcast_levels(data, like.vgrid.nz)))


def cumulative_integral(f: Field3D) -> Field3D:
    """int_bottom^xi f d xi' by the cumulative trapezoid rule."""
    d = f.data
    h = f.vgrid.h
    out = np.zeros_like(d)
    out[:, 1:] = np.cumsum(0.5 * h * (d[:, 1:] + d[:, :-1]), axis=_LEVEL_AXIS)
    return f.with_data(out)


def inner(u: Field3D, v: Field3D) -> float:
    """Discrete L^2(Omega) inner product (trapezoid in depth, grid sum in G)."""
    a, b = u.coeffs(), v.coeffs()
    w = u.vgrid.weights.reshape((1, -1, 1, 1))
    return float(4 * np.pi**2 * np.sum(w * (a * np.conj(b))).real)


def surface_inner(u: SurfaceField, v: SurfaceField) -> float:
    a, b = u.coeffs(), v.coeffs()
    return float(4 * np.pi**2 * np.sum(a * np.conj(b)).real)


def l2_norm(u) -> float:
    return float(np.sqrt(max(inner(u, u) if isinstance(u, Field3D) else surface_inner(u, u), 0.0)))
