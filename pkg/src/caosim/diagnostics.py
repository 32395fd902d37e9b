"""Energy ledgers, the cancellation integral and running norm monitors."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .calculus import d_vertical, grad_h, inner, laplace_h, d2_vertical, surface_inner, vertical_operator
from .domain import Boundary, Field3D, State, SurfaceField, to_spectral, trace
from .hydrostatics import interface_residual, reconstruct_omega, reconstruct_w
from .interface import l3_cubed, relative_velocity
from .norms import NormParameterError, h2beta_norm

CSV_FIELDS = (
    "t", "E_a", "E_o", "diss_h_a", "diss_v_a", "diss_h_o", "diss_v_o",
    "drag", "forcing_work", "residual", "V_L3cubed", "H1_a", "H1_o",
)


@dataclasses.dataclass(frozen=True)
class StepInternals:
    """What the step actually used, so the ledger pairs like with like.

    ``pair`` is the state the equations were tested against: the new state
    for backward Euler, the midpoint for Crank-Nicolson. ``drag_data`` is
    the drag field that entered the interface fluxes.
    """

    dt: float
    lam: float
    p_s: float
    pair: State
    drag_data: SurfaceField
    forcing: tuple[Field3D, Field3D] | None = None
    advection: tuple[Field3D, Field3D] | None = None
    implicit_increment: bool = True
    picard_iterations: int = 0


@dataclasses.dataclass(frozen=True)
class BudgetReport:
    """Per-step energy ledger; rates are per unit time, energies absolute."""

    t: float
    E_a: float
    E_o: float
    diss_h_a: float = 0.0
    diss_v_a: float = 0.0
    diss_h_o: float = 0.0
    diss_v_o: float = 0.0
    drag: float = 0.0
    forcing_work: float = 0.0
    residual: float = 0.0
    V_L3cubed: float = 0.0
    H1_a: float = 0.0
    H1_o: float = 0.0
    V_L3: float = 0.0
    lambda_damping: float = 0.0
    numerical_dissipation: float = 0.0
    advection_work: float = 0.0
    dE: float = 0.0
    dt: float = 0.0
    constraint: float = 0.0
    w_top: float = 0.0
    omega_top: float = 0.0
    picard_iterations: int = 0

    @property
    def E(self) -> float:
        return self.E_a + self.E_o

    @property
    def dissipation(self) -> float:
        return (self.diss_h_a + self.diss_v_a + self.diss_h_o + self.diss_v_o + self.drag
                + self.lambda_damping + self.numerical_dissipation)

    def relative_residual(self) -> float:
        return self.residual / max(self.E, 1.0)

    def csv_row(self) -> list[float]:
        return [getattr(self, k) for k in CSV_FIELDS]


def energy(f: Field3D) -> float:
    return 0.5 * inner(f, f)


def horizontal_dissipation(f: Field3D) -> float:
    """||grad_H f||^2 in the trapezoid/Parseval inner product."""
    c = to_spectral(f).data
    w = f.vgrid.weights.reshape((1, -1, 1, 1))
    return float(4 * np.pi**2 * np.sum(w * f.hgrid.k2 * np.abs(c) ** 2))


def vertical_dissipation(f: Field3D) -> float:
    """sum over half cells of a |jump|^2 / h: the discrete ||sqrt(a) d_xi f||^2."""
    c = to_spectral(f).data
    return float(4 * np.pi**2 * np.sum(vertical_operator(f.vgrid).dissipation_density(c)))


def h1_seminorm(f: Field3D) -> float:
    """sqrt(||grad_H f||^2 + ||d_xi f||^2) with unit vertical weight."""
    c = to_spectral(f).data
    jumps = np.abs(c[:, 1:] - c[:, :-1]) ** 2 / f.vgrid.h
    return math.sqrt(horizontal_dissipation(f) + float(4 * np.pi**2 * np.sum(jumps)))


def energy_budget(prev: State, nxt: State, internals: StepInternals) -> BudgetReport:
    """Discrete energy identity of one step.

    E_{n+1} - E_n = dt (forcing + advection - dissipation - drag - lambda damping)
                    - 1/2 ||v_{n+1} - v_n||^2   (backward Euler only)

    with every term tested against ``internals.pair``.
    """
    dt, p_s = internals.dt, internals.p_s
    pa, po = to_spectral(internals.pair.va), to_spectral(internals.pair.vo)
    E_a, E_o = energy(nxt.va), energy(nxt.vo)
    dE = E_a + E_o - energy(prev.va) - energy(prev.vo)
    dh_a, dv_a = horizontal_dissipation(pa), vertical_dissipation(pa)
    dh_o, dv_o = horizontal_dissipation(po), vertical_dissipation(po)
    lam_d = internals.lam * (inner(pa, pa) + inner(po, po))
    V_pair = relative_velocity(internals.pair)
    drag_term = p_s * surface_inner(internals.drag_data, V_pair)
    fw = 0.0
    if internals.forcing is not None:
        fw = inner(internals.forcing[0], pa) + inner(internals.forcing[1], po)
    adv = 0.0
    if internals.advection is not None:
        adv = inner(internals.advection[0], pa) + inner(internals.advection[1], po)
    num = 0.0
    if internals.implicit_increment:
        num = 0.5 * (inner(nxt.va - prev.va, nxt.va - prev.va) + inner(nxt.vo - prev.vo, nxt.vo - prev.vo)) / dt
    predicted = dt * (fw + adv - dh_a - dv_a - dh_o - dv_o - drag_term - lam_d - num)
    V_new = relative_velocity(nxt)
    l3c = l3_cubed(V_new)
    return BudgetReport(
        t=nxt.t, E_a=E_a, E_o=E_o, diss_h_a=dh_a, diss_v_a=dv_a, diss_h_o=dh_o, diss_v_o=dv_o,
        drag=drag_term, forcing_work=fw, residual=abs(dE - predicted), V_L3cubed=l3c,
        H1_a=h1_seminorm(nxt.va), H1_o=h1_seminorm(nxt.vo), V_L3=l3c ** (1.0 / 3.0),
        lambda_damping=lam_d, numerical_dissipation=num, advection_work=adv, dE=dE, dt=dt,
        constraint=nxt.constraint_residual(),
        w_top=interface_residual(reconstruct_w(nxt.vo)),
        omega_top=interface_residual(reconstruct_omega(nxt.va)),
        picard_iterations=internals.picard_iterations,
    )


def initial_report(state: State) -> BudgetReport:
    """Ledger row for the initial state (no step taken)."""
    l3c = l3_cubed(relative_velocity(state))
    return BudgetReport(
        t=state.t, E_a=energy(state.va), E_o=energy(state.vo), V_L3cubed=l3c, V_L3=l3c ** (1.0 / 3.0),
        H1_a=h1_seminorm(state.va), H1_o=h1_seminorm(state.vo), constraint=state.constraint_residual(),
        w_top=interface_residual(reconstruct_w(state.vo)),
        omega_top=interface_residual(reconstruct_omega(state.va)),
    )


def cancellation_check(v_tilde: Field3D, w: Field3D, g: Field3D, q: int = 2) -> float:
    """Quadrature of int (v.grad_H g + w d_xi g) . |g|^{q-2} g over the subdomain."""
    if int(q) != q or q < 2 or q % 2:
        raise ValueError(f"q must be an even integer >= 2 (got {q})")
    gs = to_spectral(g)
    gv = gs.values()
    vv = v_tilde.values()
    wv = w.values()[0]
    dz = d_vertical(gs).values()
    transport = np.empty_like(gv)
    for i in range(gs.ncomp):
        gr = grad_h(gs.with_data(gs.data[i : i + 1])).values()
        transport[i] = vv[0] * gr[0] + vv[1] * gr[1] + wv * dz[i]
    mod2 = np.sum(gv**2, axis=0)
    integrand = np.sum(transport * gv, axis=0) * mod2 ** ((q - 2) // 2)
    wts = g.vgrid.weights[:, None, None]
    return float(np.sum(wts * integrand) * g.hgrid.cell_area)


@dataclasses.dataclass(frozen=True)
class BlowupMonitor:
    times: np.ndarray
    integral_a: np.ndarray
    integral_o: np.ndarray
    p: float
    q: float
    mu_c: float

    @property
    def total(self) -> np.ndarray:
        return self.integral_a + self.integral_o

    @property
    def final(self) -> float:
        return float(self.total[-1])


def _cumtrapz(y, t):
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def blowup_monitor(traj, p: float = 4.0, q: float = 2.0) -> BlowupMonitor:
    """Running int_0^t ||v||^p_{X_{mu_c}} ds with X_beta proxied by H^{2 beta, q}."""
    if not p >= q >= 2:
        raise NormParameterError(f"need p >= q >= 2 (got p={p}, q={q})")
    mu_c = 1.0 / p + 1.0 / q
    if mu_c > 1:
        raise NormParameterError(f"mu_c = 1/p + 1/q must be <= 1 (got {mu_c})")
    times = np.array([s.t for s in traj.states])
    na = np.array([h2beta_norm(s.va, q, mu_c) ** p for s in traj.states])
    no = np.array([h2beta_norm(s.vo, q, mu_c) ** p for s in traj.states])
    return BlowupMonitor(times, _cumtrapz(na, times), _cumtrapz(no, times), p, q, mu_c)


@dataclasses.dataclass(frozen=True)
class H1Budget:
    times: np.ndarray
    h1_a: np.ndarray
    h1_o: np.ndarray
    sup_h1: np.ndarray  # running sup of ||grad v^a||^2 + ||grad v^o||^2
    int_laplace: np.ndarray  # running int of ||Delta v^a||^2 + ||Delta v^o||^2


def _laplace_sq(f: Field3D) -> float:
    g = to_spectral(f)
    lap = laplace_h(g) + d2_vertical(g)
    return inner(lap, lap)


def h1_budget(traj) -> H1Budget:
    times = np.array([s.t for s in traj.states])
    ha = np.array([h1_seminorm(s.va) for s in traj.states])
    ho = np.array([h1_seminorm(s.vo) for s in traj.states])
    lap = np.array([_laplace_sq(s.va) + _laplace_sq(s.vo) for s in traj.states])
    return H1Budget(times, ha, ho, np.maximum.accumulate(ha**2 + ho**2), _cumtrapz(lap, times))


def interface_traces(state: State) -> tuple[SurfaceField, SurfaceField]:
    return trace(state.va, Boundary.TOP), trace(state.vo, Boundary.TOP)
