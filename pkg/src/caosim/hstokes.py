"""Implicit time step of the linear hydrostatic Stokes problem.

One backward-Euler step of

    dv/dt - Delta v + lam v + grad_H pi_s = g_v,   div_H vbar = g_div,

on one subdomain with Neumann data (and optionally a Dirichlet bottom),
solved per horizontal Fourier mode. Two routes are provided:

* ``direct``: a bordered elimination per mode; the surface pressure is the
  border unknown and, for a Dirichlet bottom, so is the bottom flux.
* ``iterative``: split into the barotropic 2D Stokes problem for the
  vertical average and the baroclinic heat problem for the fluctuation,
  coupled through the boundary-derivative functional
  ``B v = (flux_top - flux_bottom) / (b - a)``, and iterated to a fixed point.

Both agree to rounding; the iteration is kept so the contraction of the
coupling map can be observed.
"""

from __future__ import annotations

import dataclasses
from functools import lru_cache

import numpy as np
import scipy.linalg

from .calculus import cumulative_integral, div_h, extend, fluctuation, grad_h, vertical_average, vertical_operator
from .domain import Field3D, HorizontalGrid, SurfaceField, VerticalGrid, to_spectral


class DataError(ValueError):
    """Linear data violate the compatibility or gauge conditions."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


@dataclasses.dataclass(frozen=True, eq=False)
class LinearData:
    """Data of one implicit step.

    Neumann data are values of dv/dxi (not fluxes). Supplying
    ``b_v_D_bottom`` turns the bottom boundary into a Dirichlet boundary and
    ``b_v_N_bottom`` is then ignored.
    """

    f_v: Field3D
    v0: Field3D
    dt: float
    lam: float = 0.0
    f_w: Field3D | None = None
    f_div: Field3D | None = None
    b_v_N_top: SurfaceField | None = None
    b_v_N_bottom: SurfaceField | None = None
    b_v_D_bottom: SurfaceField | None = None
    b_w_a: SurfaceField | None = None
    b_w_b: SurfaceField | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise DataError(f"dt must be positive (got {self.dt})")
        if self.lam < 0:
            raise DataError(f"lambda must be >= 0 (got {self.lam})")

    @property
    def hgrid(self) -> HorizontalGrid:
        return self.f_v.hgrid

    @property
    def vgrid(self) -> VerticalGrid:
        return self.f_v.vgrid

    @property
    def dirichlet_bottom(self) -> bool:
        return self.b_v_D_bottom is not None

    def scaled(self, alpha: float) -> "LinearData":
        def s(x):
            return None if x is None else alpha * to_spectral(x)

        return dataclasses.replace(
            self,
            f_v=s(self.f_v), v0=s(self.v0), f_w=s(self.f_w), f_div=s(self.f_div),
            b_v_N_top=s(self.b_v_N_top), b_v_N_bottom=s(self.b_v_N_bottom),
            b_v_D_bottom=s(self.b_v_D_bottom), b_w_a=s(self.b_w_a), b_w_b=s(self.b_w_b),
        )

    def __add__(self, other: "LinearData") -> "LinearData":
        def a(x, y):
            if x is None and y is None:
                return None
            if x is None:
                return to_spectral(y)
            if y is None:
                return to_spectral(x)
            return to_spectral(x) + to_spectral(y)

        if (self.dt, self.lam, self.dirichlet_bottom) != (other.dt, other.lam, other.dirichlet_bottom):
            raise DataError("cannot superpose data with different dt, lambda or boundary types")
        return dataclasses.replace(
            self,
            f_v=a(self.f_v, other.f_v), v0=a(self.v0, other.v0), f_w=a(self.f_w, other.f_w),
            f_div=a(self.f_div, other.f_div), b_v_N_top=a(self.b_v_N_top, other.b_v_N_top),
            b_v_N_bottom=a(self.b_v_N_bottom, other.b_v_N_bottom),
            b_v_D_bottom=a(self.b_v_D_bottom, other.b_v_D_bottom),
            b_w_a=a(self.b_w_a, other.b_w_a), b_w_b=a(self.b_w_b, other.b_w_b),
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ReducedData:
    g_v: Field3D
    g_div: SurfaceField


@dataclasses.dataclass(frozen=True, eq=False)
class LinearSolution:
    v: Field3D
    pi_s: SurfaceField
    flux_bottom: SurfaceField
    flux_top: SurfaceField
    residuals: list[float]
    mode: str

    @property
    def iterations(self) -> int:
        return len(self.residuals)


class _ColumnInverse:
    """(c I - H^{-1} K)^{-1} for all modes at once via the generalised eigenbasis of (K, H)."""

    def __init__(self, K: np.ndarray, w: np.ndarray):
        sigma, phi = scipy.linalg.eigh(K, np.diag(w))
        self.sigma = sigma[None, :, None, None]
        self.phi = phi
        self.left = phi.T * w[None, :]

    def __call__(self, y: np.ndarray, c: np.ndarray) -> np.ndarray:
        shape = y.shape
        coef = (self.left @ y.reshape(shape[0], shape[1], -1)).reshape(shape)
        coef = coef / (c[None, None] - self.sigma)
        return (self.phi @ coef.reshape(shape[0], shape[1], -1)).reshape(shape)


class VerticalSolver:
    """Per-mode column solves for one vertical grid."""

    def __init__(self, vgrid: VerticalGrid):
        self.vgrid = vgrid
        self.op = vertical_operator(vgrid)
        K, w = self.op.K, self.op.weights
        self.K, self.w = K, w
        self.length = vgrid.length
        self.neumann = _ColumnInverse(K, w)
        self.dirichlet = _ColumnInverse(K[1:, 1:], w[1:])

    def _w(self, ndim=4):
        return self.w.reshape((1, -1) + (1,) * (ndim - 2))

    def average(self, x: np.ndarray) -> np.ndarray:
        return np.sum(self._w(x.ndim) * x, axis=1) / self.length

    # --- baroclinic column problems -------------------------------------------------
    def baroclinic_neumann(self, R, c, Fb, Ft):
        """c v - L v + B = R with Neumann fluxes; B = (Ft - Fb)/length is data here."""
        y = R - ((Ft - Fb) / self.length)[:, None]
        y = y.copy()
        y[:, -1] += Ft / self.w[-1]
        y[:, 0] -= Fb / self.w[0]
        v = self.neumann(y, c)
        return v - self.average(v)[:, None]

    def baroclinic_dirichlet(self, R, c, d, Ft):
        """c v - L v + B v = R with v(bottom) = d; returns (v, bottom flux).

        The bottom flux enters every row through B (rank one) and the
        bottom half-cell balance; it is eliminated by a Schur complement.
        """
        K, w, L = self.K, self.w, self.length
        rhs = R[:, 1:] - (Ft / L)[:, None]
        rhs = rhs + (K[1:, 0][None, :, None, None] * d[:, None]) / self._w()[:, 1:]
        rhs[:, -1] += Ft / w[-1]
        x0 = self.dirichlet(rhs, c)
        u1 = self.dirichlet(np.ones((1, R.shape[1] - 1) + R.shape[2:], dtype=R.dtype) / L, c)
        k00, k01 = K[0, 0], K[0, 1]
        denom = 1.0 / w[0] - 1.0 / L - k01 * u1[:, 0] / w[0]
        num = R[:, 0] - c * d + k00 * d / w[0] - Ft / L + k01 * x0[:, 0] / w[0]
        Fb = num / denom
        v = np.empty_like(R)
        v[:, 0] = d
        v[:, 1:] = x0 + Fb[:, None] * u1
        return v, Fb

    # --- unsplit bordered solve ---------------------------------------------------------
    def direct(self, R, c, g, kx, ky, k2, Ft, Fb=None, d=None):
        """Solve c v - L v + i k pi = R, i k . avg(v) = g for (v, pi, bottom flux)."""
        K, w, L = self.K, self.w, self.length
        nz = R.shape[1]
        safe_k2 = np.where(k2 == 0, 1.0, k2)
        if d is None:
            y = R.copy()
            y[:, -1] += Ft / w[-1]
            y[:, 0] -= Fb / w[0]
            x = self.neumann(y, c)
            A = self.average(x)
            m1 = 1.0 / c
            u1 = np.broadcast_to((1.0 / c)[None, None], (1, nz) + c.shape)
        else:
            y = R[:, 1:] + (K[1:, 0][None, :, None, None] * d[:, None]) / self._w()[:, 1:]
            y[:, -1] += Ft / w[-1]
            x_r = self.dirichlet(y, c)
            u1_r = self.dirichlet(np.ones((1, nz - 1) + c.shape, dtype=R.dtype), c)
            x = np.concatenate([d[:, None], x_r], axis=1)
            u1 = np.concatenate([np.zeros((1, 1) + c.shape, dtype=R.dtype), u1_r], axis=1)
            A = self.average(x)
            m1 = self.average(u1)[0]
        pi = (g - 1j * (kx * A[0] + ky * A[1])) / (safe_k2 * np.where(k2 == 0, 1.0, m1))
        pi = np.where(k2 == 0, 0.0, pi)
        ik = np.stack([1j * kx, 1j * ky])
        v = x - ik[:, None] * pi[None, None] * u1
        if d is not None:
            Kv0 = K[0, 0] * v[:, 0] + K[0, 1] * v[:, 1]
            Fb = w[0] * (R[:, 0] - c * v[:, 0] - ik * pi[None]) + Kv0
        return v, pi, Fb


@lru_cache(maxsize=32)
def vertical_solver(vgrid: VerticalGrid) -> VerticalSolver:
    return VerticalSolver(vgrid)


def _coeffs(x, shape, dtype=complex):
    if x is None:
        return np.zeros(shape, dtype=dtype)
    return to_spectral(x).data


class HydrostaticStokesSolver:
    def __init__(self, hgrid: HorizontalGrid, vgrid: VerticalGrid, *, compat_tol: float = 1e-10,
                 picard_tol: float = 1e-11, picard_max: int = 25):
        self.hgrid, self.vgrid = hgrid, vgrid
        self.compat_tol, self.picard_tol, self.picard_max = compat_tol, picard_tol, picard_max
        self.columns = vertical_solver(vgrid)
        self.op = self.columns.op

    def _c(self, lam, dt):
        return 1.0 / dt + self.hgrid.k2 + lam

    # --- Step 1 ------------------------------------------------------------------
    def reduce(self, data: LinearData, check: bool = True) -> ReducedData:
        g_v = to_spectral(data.f_v)
        if data.f_w is not None:
            g_v = g_v - grad_h(cumulative_integral(to_spectral(data.f_w)))
        shape = (1,) + self.hgrid.shape
        g = np.zeros(shape, dtype=complex)
        if data.b_w_a is not None or data.b_w_b is not None:
            g = g + (_coeffs(data.b_w_a, shape) - _coeffs(data.b_w_b, shape)) / self.vgrid.length
        if data.f_div is not None:
            g = g + vertical_average(to_spectral(data.f_div)).data
        g_div = SurfaceField(self.hgrid, g, spectral=True)
        if check:
            if abs(g[0, 0, 0]) > self.compat_tol:
                raise DataError(f"g_div has nonzero mean {abs(g[0, 0, 0]):.3e}; the constraint is unsolvable on the torus")
            mismatch = div_h(vertical_average(to_spectral(data.v0))) - g_div
            err = float(np.max(np.abs(mismatch.values())))
            if err > self.compat_tol:
                raise DataError(f"initial data violate div_H vbar0 = g_div (max mismatch {err:.3e})")
        return ReducedData(g_v=g_v, g_div=g_div)

    # --- Step 2: barotropic and baroclinic pieces ------------------------------------
    def solve_barotropic(self, rhs: SurfaceField, g_div: SurfaceField, vbar_prev: SurfaceField,
                         lam: float, dt: float) -> tuple[SurfaceField, SurfaceField]:
        hg = self.hgrid
        g = to_spectral(g_div).data[0]
        if abs(g[0, 0]) > self.compat_tol:
            raise DataError(f"g_div must have zero mean (got {abs(g[0, 0]):.3e})")
        R = to_spectral(rhs).data + to_spectral(vbar_prev).data / dt
        c = self._c(lam, dt)
        k2 = np.where(hg.k2 == 0, 1.0, hg.k2)
        pi = (c * g - 1j * (hg.kx * R[0] + hg.ky * R[1])) / k2
        pi = np.where(hg.k2 == 0, 0.0, pi)
        vbar = (R - np.stack([1j * hg.kx * pi, 1j * hg.ky * pi])) / c
        return SurfaceField(hg, vbar, True), SurfaceField(hg, pi[None], True)

    def _baroclinic(self, rhs, vt_prev, lam, dt, Ft, Fb=None, d=None):
        R = to_spectral(rhs).data + to_spectral(vt_prev).data / dt
        c = self._c(lam, dt)
        if d is None:
            return self.columns.baroclinic_neumann(R, c, Fb, Ft), Fb
        return self.columns.baroclinic_dirichlet(R, c, d, Ft)

    def solve_baroclinic(self, rhs: Field3D, b_N_top: SurfaceField | None, b_N_bottom: SurfaceField | None,
                         vt_prev: Field3D, lam: float, dt: float, b_D_bottom: SurfaceField | None = None) -> Field3D:
        shape = (2,) + self.hgrid.shape
        Fb, Ft = self.op.flux(_coeffs(b_N_bottom, shape), _coeffs(b_N_top, shape))
        d = None if b_D_bottom is None else to_spectral(b_D_bottom).data
        v, _ = self._baroclinic(rhs, vt_prev, lam, dt, Ft, Fb, d)
        return Field3D(self.hgrid, self.vgrid, v, spectral=True)

    # --- Step 3: the coupled problem -------------------------------------------------
    def _fluxes(self, data: LinearData):
        shape = (2,) + self.hgrid.shape
        Fb, Ft = self.op.flux(_coeffs(data.b_v_N_bottom, shape), _coeffs(data.b_v_N_top, shape))
        d = to_spectral(data.b_v_D_bottom).data if data.dirichlet_bottom else None
        return Fb, Ft, d

    def solve_coupled(self, data: LinearData, mode: str = "direct", check: bool = True) -> LinearSolution:
        red = self.reduce(data, check=check)
        if mode == "direct":
            return self._solve_direct(data, red)
        if mode == "iterative":
            return self._solve_iterative(data, red)
        raise ValueError(f"unknown mode {mode!r}")

    def _solve_direct(self, data, red):
        hg = self.hgrid
        Fb, Ft, d = self._fluxes(data)
        R = red.g_v.data + to_spectral(data.v0).data / data.dt
        c = self._c(data.lam, data.dt)
        v, pi, Fb = self.columns.direct(R, c, red.g_div.data[0], hg.kx, hg.ky, hg.k2, Ft, Fb=Fb, d=d)
        return LinearSolution(
            v=Field3D(hg, self.vgrid, v, True), pi_s=SurfaceField(hg, pi[None], True),
            flux_bottom=SurfaceField(hg, Fb, True), flux_top=SurfaceField(hg, Ft, True),
            residuals=[0.0], mode="direct",
        )

    def _solve_iterative(self, data, red):
        hg = self.hgrid
        Fb, Ft, d = self._fluxes(data)
        L = self.vgrid.length
        gbar = vertical_average(red.g_v)
        gtilde = fluctuation(red.g_v)
        v0 = to_spectral(data.v0)
        vbar0, vt0 = vertical_average(v0), fluctuation(v0)
        # B of the zero initial guess: Neumann sides contribute their data
        fb_guess = Fb if d is None else np.zeros_like(Ft)
        B_used = (Ft - fb_guess) / L
        residuals: list[float] = []
        for _ in range(self.picard_max):
            vbar, pi = self.solve_barotropic(gbar + SurfaceField(hg, B_used, True), red.g_div, vbar0,
                                             data.lam, data.dt)
            dvals = None if d is None else d - vbar.data
            vt, Fb_new = self._baroclinic(gtilde, vt0, data.lam, data.dt, Ft, Fb, dvals)
            B_new = (Ft - Fb_new) / L
            v = vt + np.array(np.broadcast_to(vbar.data[:, None], vt.shape))
            vnorm = np.sqrt(4 * np.pi**2 * np.sum(self.columns._w() * np.abs(v) ** 2))
            res = float(np.sqrt(4 * np.pi**2 * np.sum(np.abs(B_new - B_used) ** 2)))
            residuals.append(res)
            B_used = B_new
            if res <= self.picard_tol * (1.0 + vnorm):
                return LinearSolution(
                    v=Field3D(hg, self.vgrid, v, True), pi_s=pi, flux_bottom=SurfaceField(hg, Fb_new, True),
                    flux_top=SurfaceField(hg, Ft, True), residuals=residuals, mode="iterative",
                )
        raise ConvergenceError(
            f"barotropic/baroclinic iteration did not converge in {self.picard_max} sweeps "
            f"(last residual {residuals[-1]:.3e}); reduce dt", residuals)

    # --- diagnostics of a solution ----------------------------------------------------
    def vertical_velocity(self, sol: LinearSolution, data: LinearData) -> Field3D:
        """w = b_w_a + int_a^z f_div - int_a^z div_H v."""
        w = -cumulative_integral(div_h(sol.v))
        if data.f_div is not None:
            w = w + cumulative_integral(to_spectral(data.f_div))
        if data.b_w_a is not None:
            w = w + extend(to_spectral(data.b_w_a), w)
        return w

    def pressure(self, sol: LinearSolution, data: LinearData) -> Field3D:
        """pi = pi_s + int_a^z f_w."""
        p = extend(sol.pi_s, Field3D.zeros(self.hgrid, self.vgrid, 1))
        if data.f_w is not None:
            p = p + cumulative_integral(to_spectral(data.f_w))
        return p


@lru_cache(maxsize=32)
def _solver(hgrid: HorizontalGrid, vgrid: VerticalGrid) -> HydrostaticStokesSolver:
    return HydrostaticStokesSolver(hgrid, vgrid)


def reduce(data: LinearData) -> ReducedData:
    return _solver(data.hgrid, data.vgrid).reduce(data)


def solve_barotropic(rhs, g_div, vbar_prev, lam, dt):
    return _solver(rhs.hgrid, _any_vgrid()).solve_barotropic(rhs, g_div, vbar_prev, lam, dt)


def _any_vgrid():
    return VerticalGrid.ocean(3)


def solve_baroclinic(rhs, b_N_top, b_N_bottom, vt_prev, lam, dt, b_D_bottom=None):
    return _solver(rhs.hgrid, rhs.vgrid).solve_baroclinic(rhs, b_N_top, b_N_bottom, vt_prev, lam, dt, b_D_bottom)


def solve_coupled(data: LinearData, mode: str = "direct") -> LinearSolution:
    return _solver(data.hgrid, data.vgrid).solve_coupled(data, mode)
