"""Air-sea coupling through the quadratic drag of the relative interface velocity."""

from __future__ import annotations

import dataclasses

import numpy as np

from .domain import Boundary, GridError, State, SurfaceField, dealias, to_spectral, trace


@dataclasses.dataclass(frozen=True)
class InterfaceState:
    V: SurfaceField
    V_bar: SurfaceField
    V_tilde: SurfaceField
    drag: SurfaceField
    p_s: float


def relative_velocity(state: State) -> SurfaceField:
    """V = v^a at p = p_s minus v^o at z = 0."""
    if state.va.hgrid != state.vo.hgrid:
        raise GridError("atmosphere and ocean grids differ horizontally")
    return trace(to_spectral(state.va), Boundary.TOP) - trace(to_spectral(state.vo), Boundary.TOP)


def _modulus(V: np.ndarray) -> np.ndarray:
    return np.sqrt(V[0] ** 2 + V[1] ** 2)[None]


def drag(V: SurfaceField, linear: bool = False, dealiased: bool = True) -> SurfaceField:
    """Pointwise V |V| in physical space, dealiased.

    ``linear=True`` swaps in the linear law V (test mode only). With
    ``dealiased=False`` the raw grid product is returned; only that one keeps
    the pointwise sign of V.drag, the projection preserves it in integral.
    """
    if linear:
        return dealias(V) if dealiased else to_spectral(V)
    vals = V.values()
    out = SurfaceField(V.hgrid, vals * _modulus(vals))
    return dealias(out) if dealiased else out


def drag_semi_implicit(V_lag: SurfaceField, V_new: SurfaceField) -> SurfaceField:
    """V_new |V_lag|, the lagged-modulus linearisation of the drag."""
    return dealias(SurfaceField(V_new.hgrid, V_new.values() * _modulus(V_lag.values())))


def neumann_data(D: SurfaceField, p_s: float = 1.0) -> tuple[SurfaceField, SurfaceField]:
    """Interface derivative data (dv^a/dp, dv^o/dz) for a drag field D."""
    return (-1.0 / p_s) * D, p_s * D


def interface_state(state: State, p_s: float = 1.0) -> InterfaceState:
    from .calculus import vertical_average

    V = relative_velocity(state)
    V_bar = vertical_average(to_spectral(state.va)) - vertical_average(to_spectral(state.vo))
    return InterfaceState(V=V, V_bar=V_bar, V_tilde=V - V_bar, drag=drag(V), p_s=p_s)


def l3_cubed(V: SurfaceField) -> float:
    """||V||^3 in L^3(G) by grid quadrature."""
    vals = V.values()
    return float(np.sum(_modulus(vals) ** 3) * V.hgrid.cell_area)
