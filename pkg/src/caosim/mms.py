"""Manufactured solutions for the implicit linear solver and the nonlinear step.

Forcings and Neumann data are derived symbolically (sympy) from closed-form
velocities and surface pressures, then sampled on the grid.
"""

from __future__ import annotations

import dataclasses
import math
from functools import cached_property

import numpy as np
import sympy as sp

from .calculus import laplacian
from .domain import Field3D, HorizontalGrid, Kind, SurfaceField, VerticalGrid, to_spectral
from .hstokes import HydrostaticStokesSolver, LinearData
from .stepper import _nonlinearity

X, Y, XI, T = sp.symbols("x y xi t", real=True)
E1 = sp.exp(-1)


@dataclasses.dataclass(frozen=True)
class MMSCase:
    """Closed-form (v1, v2, pi_s) on one subdomain; ``xi`` is z or p."""

    name: str
    kind: Kind
    v1: str
    v2: str
    pi_s: str = "0"
    lam: float = 0.0
    nonlinear: bool = False
    p_s: float = 1.0

    @cached_property
    def _exprs(self):
        env = {"x": X, "y": Y, "xi": XI, "t": T, "pi": sp.pi, "L": self.length, "pa": self.bottom}
        v = [sp.sympify(self.v1, locals=env), sp.sympify(self.v2, locals=env)]
        ps = sp.sympify(self.pi_s, locals=env)
        a = XI**2 if self.kind is Kind.ATMOSPHERE else sp.Integer(1)
        lap = [sp.diff(c, X, 2) + sp.diff(c, Y, 2) + sp.diff(a * sp.diff(c, XI), XI) for c in v]
        f = [sp.diff(c, T) - l + self.lam * c for c, l in zip(v, lap)]
        f[0] += sp.diff(ps, X)
        f[1] += sp.diff(ps, Y)
        if self.nonlinear:
            div = sp.diff(v[0], X) + sp.diff(v[1], Y)
            s = sp.Symbol("s", real=True)
            w = -sp.integrate(div.subs(XI, s), (s, self.bottom, XI))
            for i, c in enumerate(v):
                f[i] += v[0] * sp.diff(c, X) + v[1] * sp.diff(c, Y) + w * sp.diff(c, XI)
        dv = [sp.diff(c, XI) for c in v]
        return v, ps, f, dv

    @property
    def bottom(self):
        return self.p_s * E1 if self.kind is Kind.ATMOSPHERE else sp.Integer(-1)

    @property
    def length(self):
        return (self.p_s - self.p_s * E1) if self.kind is Kind.ATMOSPHERE else sp.Integer(1)

    @cached_property
    def _funcs(self):
        v, ps, f, dv = self._exprs
        lam = lambda e: sp.lambdify((X, Y, XI, T), e, "numpy")
        return [lam(c) for c in v], lam(ps), [lam(c) for c in f], [lam(c) for c in dv]

    def vgrid(self, nz: int) -> VerticalGrid:
        if self.kind is Kind.ATMOSPHERE:
            return VerticalGrid.atmosphere(nz, self.p_s)
        return VerticalGrid.ocean(nz)

    def _field(self, fns, hgrid, vgrid, t):
        return Field3D.from_function(hgrid, vgrid, lambda x, y, z: tuple(fn(x, y, z, t) for fn in fns))

    def velocity(self, hgrid, vgrid, t=0.0) -> Field3D:
        return self._field(self._funcs[0], hgrid, vgrid, t)

    def forcing(self, hgrid, vgrid, t=0.0) -> Field3D:
        return self._field(self._funcs[2], hgrid, vgrid, t)

    def pressure(self, hgrid, t=0.0) -> SurfaceField:
        fn = self._funcs[1]
        return SurfaceField.from_function(hgrid, lambda x, y: fn(x, y, 0.0, t))

    def neumann(self, hgrid, vgrid, t=0.0) -> tuple[SurfaceField, SurfaceField]:
        """(bottom, top) values of dv/dxi."""
        fns = self._funcs[3]

        def at(xi):
            return SurfaceField.from_function(hgrid, lambda x, y: tuple(fn(x, y, xi, t) for fn in fns))

        return at(vgrid.nodes[0]), at(vgrid.nodes[-1])


CASES = {
    # non-polynomial vertical profiles; vertical average is div_H-free
    "linear-ocean": MMSCase(
        "linear-ocean", Kind.OCEAN,
        "cos(y)*exp(xi) + cos(x)*cos(pi*xi)", "sin(x)*cos(2*xi)", "sin(x + y)", lam=0.5,
    ),
    "linear-atmosphere": MMSCase(
        "linear-atmosphere", Kind.ATMOSPHERE,
        "cos(y)*sin(2*xi) + cos(x)*cos(2*pi*(xi - pa)/L)", "sin(x)*exp(xi)", "cos(2*x - y)", lam=0.5,
    ),
    # at most quadratic in depth (linear in the div_H-carrying part, whose trapezoid
    # average is then exact): the vertical discretisation is exact
    "horizontal-ocean": MMSCase(
        "horizontal-ocean", Kind.OCEAN,
        "cos(y)*(1 + xi**2) + 2*sin(x)*sin(2*y)*(1 + xi**2) + cos(2*x)*(xi + 1/2)",
        "sin(x)*(2 - xi) + cos(x)*cos(2*y)*(1 + xi**2)", "sin(x + y)", lam=0.5,
    ),
    "horizontal-atmosphere": MMSCase(
        "horizontal-atmosphere", Kind.ATMOSPHERE, "cos(y) + 2*sin(x)*sin(2*y)", "sin(x) + cos(x)*cos(2*y)",
        "cos(x - 2*y)", lam=0.5,
    ),
    "temporal-ocean": MMSCase(
        "temporal-ocean", Kind.OCEAN,
        "cos(t)*(cos(y)*(1 + xi**2) + cos(x)*(xi + 1/2))", "sin(t + 1)*sin(x)*(2 - xi)",
        "cos(t)*sin(x + y)", lam=0.5,
    ),
    "nonlinear-ocean": MMSCase(
        "nonlinear-ocean", Kind.OCEAN,
        "0.3*(cos(y)*exp(xi) + cos(x)*cos(pi*xi))", "0.3*sin(x)*cos(2*xi)", "0.3*sin(x + y)",
        lam=1.0, nonlinear=True,
    ),
}


def _error(v: Field3D, exact: Field3D) -> float:
    return float(np.max(np.abs(v.values() - exact.values())))


def steady_error(case: MMSCase, nx: int, nz: int, *, picard_tol: float = 1e-12, picard_max: int = 60) -> float:
    """Max-norm error of one implicit solve (dt = 1) started from the exact field.

    With v_prev equal to the exact solution the time derivative drops out,
    so the error measures spatial consistency alone.
    """
    hg = HorizontalGrid(nx, nx)
    vg = case.vgrid(nz)
    exact = to_spectral(case.velocity(hg, vg))
    f = to_spectral(case.forcing(hg, vg))
    bb, bt = case.neumann(hg, vg)
    solver = HydrostaticStokesSolver(hg, vg)
    cur = exact
    for _ in range(picard_max):
        rhs = f + _nonlinearity(cur, "advective") if case.nonlinear else f
        v = solver.solve_coupled(LinearData(f_v=rhs, v0=exact, dt=1.0, lam=case.lam, b_v_N_top=bt,
                                            b_v_N_bottom=bb), check=False).v
        if not case.nonlinear:
            return _error(v, exact)
        delta = float(np.max(np.abs(v.data - cur.data)))
        cur = v
        if delta < picard_tol:
            return _error(v, exact)
    raise RuntimeError(f"manufactured nonlinear solve did not converge ({delta:.2e})")


def temporal_error(case: MMSCase, dt: float, t_end: float = 1.0, scheme: str = "backward_euler",
                   nx: int = 8, nz: int = 9) -> float:
    hg = HorizontalGrid(nx, nx)
    vg = case.vgrid(nz)
    solver = HydrostaticStokesSolver(hg, vg)
    steps = int(round(t_end / dt))
    v = to_spectral(case.velocity(hg, vg, 0.0))
    for n in range(steps):
        t0, t1 = n * dt, (n + 1) * dt
        bb1, bt1 = case.neumann(hg, vg, t1)
        if scheme == "backward_euler":
            data = LinearData(f_v=case.forcing(hg, vg, t1), v0=v, dt=dt, lam=case.lam,
                              b_v_N_top=bt1, b_v_N_bottom=bb1)
        elif scheme == "crank_nicolson":
            bb0, bt0 = case.neumann(hg, vg, t0)
            explicit = laplacian(v, bb0, bt0) - v * case.lam
            rhs = to_spectral(case.forcing(hg, vg, t0)) + to_spectral(case.forcing(hg, vg, t1)) + explicit
            data = LinearData(f_v=rhs, v0=v, dt=0.5 * dt, lam=case.lam, b_v_N_top=bt1, b_v_N_bottom=bb1)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        v = solver.solve_coupled(data, check=False).v
    return _error(v, case.velocity(hg, vg, steps * dt))


@dataclasses.dataclass(frozen=True)
class Row:
    resolution: float
    error: float
    ratio: float


def _rows(res, errs):
    out = []
    for i, (r, e) in enumerate(zip(res, errs)):
        out.append(Row(r, e, math.nan if i == 0 else errs[i - 1] / e))
    return out


def vertical_sweep(case: MMSCase, refine: int = 3, nz0: int = 8, nx: int = 8) -> list[Row]:
    """Errors for nz = nz0 * 2^j (intervals doubling), j = 0..refine-1."""
    nzs = [(nz0 * 2**j) + 1 for j in range(refine)]
    return _rows(nzs, [steady_error(case, nx, nz) for nz in nzs])


def horizontal_sweep(case: MMSCase, nxs=(8, 16, 32), nz: int = 9) -> list[Row]:
    return _rows(list(nxs), [steady_error(case, nx, nz) for nx in nxs])


def time_sweep(case: MMSCase, scheme: str, dts=(0.1, 0.05, 0.025, 0.0125), t_end: float = 1.0) -> list[Row]:
    return _rows(list(dts), [temporal_error(case, dt, t_end, scheme) for dt in dts])


def observed_orders(rows: list[Row]) -> list[float]:
    return [math.log2(r.ratio) for r in rows[1:]]
