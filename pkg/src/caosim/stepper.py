"""Nonlinear time stepping of the coupled system.

Each step runs an outer fixed-point loop: advection and drag are frozen at
the current iterate, both subdomain linear problems are solved implicitly
(diffusion and surface pressure), and the loop repeats until the iterates
stop moving. Drag enters as Neumann data at the interface node:

    atmosphere  dv/dp = -D / p_s,     ocean  dv/dz = p_s D,

with D = V|V| in one of several linearisations (see ``DragMode``).
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math

import numpy as np

from .calculus import div_h, extend, grad_h, inner, laplacian, sbp_derivative, vertical_average, d_vertical
from .diagnostics import BudgetReport, StepInternals, energy_budget, initial_report
from .domain import Field3D, HorizontalGrid, Kind, State, SurfaceField, VerticalGrid, dealias, to_spectral
from .hstokes import ConvergenceError, DataError, HydrostaticStokesSolver, LinearData
from .hydrostatics import vertical_velocity
from .interface import drag, drag_semi_implicit, neumann_data, relative_velocity

log = logging.getLogger(__name__)


class Scheme(enum.Enum):
    BACKWARD_EULER = "backward_euler"
    CRANK_NICOLSON = "crank_nicolson"


class DragMode(enum.Enum):
    SEMI_IMPLICIT_LAG = "semi_implicit_lag"  # V_{n+1} |V_n|
    EXPLICIT = "explicit"  # V_n |V_n|
    OFF = "off"  # test flag: decoupled subdomains
    LINEAR = "linear"  # test flag: linear law V_{n+1}


class StepFailure(RuntimeError):
    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


@dataclasses.dataclass(frozen=True)
class StepConfig:
    dt: float
    scheme: Scheme = Scheme.BACKWARD_EULER
    picard_tol: float = 1e-11
    picard_max: int = 25
    lam: float = 0.0
    p_s: float = 1.0
    drag_mode: DragMode = DragMode.SEMI_IMPLICIT_LAG
    max_halvings: int = 3
    advection: str = "skew"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive (got {self.dt})")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0 (got {self.lam})")
        if not self.p_s > 0:
            raise ValueError(f"p_s must be positive (got {self.p_s})")
        if self.picard_max < 1:
            raise ValueError("picard_max must be >= 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "drag_mode", DragMode(self.drag_mode))
        if self.advection not in ("skew", "advective", "none"):
            raise ValueError(f"unknown advection form {self.advection!r}")


# --- nonlinearities -----------------------------------------------------------------

def _nonlinearity(v: Field3D, form: str) -> Field3D:
    g = to_spectral(v)
    u = g.values()
    W = vertical_velocity(g).values()[0]
    grads = np.stack([grad_h(g.with_data(g.data[i : i + 1])).values() for i in range(2)])  # (i, j, ...)
    transport = u[None, 0] * grads[:, 0] + u[None, 1] * grads[:, 1]
    if form == "advective":
        dxi = d_vertical(g).values()
        out = -(transport + W[None] * dxi)
        return dealias(g.with_data(out, spectral=False))
    # skew-symmetric form 1/2 [advective + conservative]
    dxi = sbp_derivative(u, g.vgrid)
    cons_h = np.stack([div_h(g.with_data(u[i][None] * u, spectral=False)).values()[0] for i in range(2)])
    cons_v = sbp_derivative(W[None] * u, g.vgrid)
    out = -0.5 * (transport + W[None] * dxi + cons_h + cons_v)
    return dealias(g.with_data(out, spectral=False))


def nonlinearity_a(va: Field3D, form: str = "advective") -> Field3D:
    """-(v . grad_H v + omega d_p v) with omega reconstructed from v."""
    if va.vgrid.kind is not Kind.ATMOSPHERE:
        raise ValueError("nonlinearity_a needs an atmosphere field")
    return _nonlinearity(va, form)


def nonlinearity_o(vo: Field3D, form: str = "advective") -> Field3D:
    """-(v . grad_H v + w d_z v) with w reconstructed from v."""
    if vo.vgrid.kind is not Kind.OCEAN:
        raise ValueError("nonlinearity_o needs an ocean field")
    return _nonlinearity(vo, form)


def _advection(v: Field3D, form: str) -> Field3D:
    if form == "none":
        return Field3D.zeros(v.hgrid, v.vgrid)
    return _nonlinearity(v, form)


# --- forcing and initial data --------------------------------------------------------

def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _zeta(vgrid: VerticalGrid) -> np.ndarray:
    return (vgrid.nodes - vgrid.bottom) / vgrid.length


def random_smooth_field(rng: np.random.Generator, hgrid: HorizontalGrid, vgrid: VerticalGrid,
                        decay: float = -4.0, n_vertical: int = 4) -> Field3D:
    """Random real 2-vector field with amplitude ~ (1 + |k|)^decay (1 + m)^decay.

    Horizontal structure is band limited to the dealiased band; vertical
    structure is a sum of cos(m pi zeta) on the normalised column.
    """
    shape = (2, n_vertical) + hgrid.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    m = np.arange(n_vertical)
    coef *= (1.0 + hgrid.kmag) ** decay * hgrid.dealias_mask
    coef *= ((1.0 + m) ** decay)[None, :, None, None]
    surf = np.fft.ifft2(coef, axes=(-2, -1)).real * (hgrid.nx * hgrid.ny)
    prof = np.cos(np.pi * m[:, None] * _zeta(vgrid)[None, :])  # (m, nz)
    vals = np.einsum("mz,cmxy->czxy", prof, surf)
    return dealias(Field3D(hgrid, vgrid, vals))


def band_limited_field(rng: np.random.Generator, hgrid: HorizontalGrid, vgrid: VerticalGrid,
                       kmax: int = 4, decay: float = -2.0, n_vertical: int = 3) -> Field3D:
    """Random field on |kx|, |ky| <= kmax drawn in a grid-independent order.

    The same seed gives the same continuous function on every grid that
    resolves kmax, which is what refinement studies need.
    """
    if 2 * kmax >= min(hgrid.nx, hgrid.ny):
        raise ValueError(f"kmax = {kmax} is not resolved on a {hgrid.nx}x{hgrid.ny} grid")
    ks = np.arange(-kmax, kmax + 1)
    shape = (2, n_vertical, ks.size, ks.size)
    amp = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kx, ky = np.meshgrid(ks, ks, indexing="ij")
    amp *= ((1.0 + np.hypot(kx, ky)) ** decay)[None, None]
    amp *= ((1.0 + np.arange(n_vertical)) ** decay)[None, :, None, None]
    coef = np.zeros((2, n_vertical) + hgrid.shape, dtype=complex)
    coef[:, :, kx % hgrid.nx, ky % hgrid.ny] = amp
    surf = np.fft.ifft2(coef, axes=(-2, -1)).real * (hgrid.nx * hgrid.ny)
    prof = np.cos(np.pi * np.arange(n_vertical)[:, None] * _zeta(vgrid)[None, :])
    return Field3D(hgrid, vgrid, np.einsum("mz,cmxy->czxy", prof, surf))


def leray_average(v: Field3D) -> Field3D:
    """Project the vertical average onto div_H-free fields; the fluctuation is untouched."""
    g = to_spectral(v)
    avg = vertical_average(g)
    hg = g.hgrid
    k2 = np.where(hg.k2 == 0, 1.0, hg.k2)
    div = div_h(avg).data[0]
    # potential q with Delta_H q = div_H avg
    q = np.where(hg.k2 == 0, 0.0, -div / k2)
    grad_part = grad_h(SurfaceField(hg, q[None], True))
    return g - extend(grad_part, g)


@dataclasses.dataclass(frozen=True)
class Forcing:
    """Time-independent forcing preset."""

    preset: str = "zero"
    amplitude: float = 0.0
    seed: int = 0
    decay: float = -4.0

    def __post_init__(self):
        if self.preset not in ("zero", "pattern", "random"):
            raise ValueError(f"unknown forcing preset {self.preset!r}")

    def fields(self, hgrid: HorizontalGrid, vga: VerticalGrid, vgo: VerticalGrid) -> tuple[Field3D, Field3D]:
        if self.preset == "zero" or self.amplitude == 0:
            return Field3D.zeros(hgrid, vga), Field3D.zeros(hgrid, vgo)
        if self.preset == "pattern":
            def make(vg, phase):
                prof = 1.0 + 0.5 * np.cos(np.pi * _zeta(vg))[:, None, None]
                X, Y = hgrid.mesh
                vals = np.stack([np.sin(Y + phase)[None] * prof, np.sin(X - phase)[None] * prof])
                return dealias(Field3D(hgrid, vg, self.amplitude * vals))
            return make(vga, 0.0), make(vgo, 0.5)
        rng = _rng(self.seed)
        out = []
        for vg in (vga, vgo):
            f = to_spectral(random_smooth_field(rng, hgrid, vg, self.decay))
            rms = math.sqrt(inner(f, f) / (4 * np.pi**2 * vg.length))
            out.append(f * (self.amplitude / rms if rms > 0 else 0.0))
        return out[0], out[1]


def initial_state(preset: str, hgrid: HorizontalGrid, vga: VerticalGrid, vgo: VerticalGrid,
                  amplitude: float = 1.0, seed: int = 0, decay: float = -4.0) -> State:
    """Initial data; 'random' is scaled to energy ``amplitude``."""
    if preset == "zero":
        return State(Field3D.zeros(hgrid, vga), Field3D.zeros(hgrid, vgo), 0.0)
    if preset == "uniform":
        def make(vg, sign):
            z = _zeta(vg)[:, None, None] * np.ones(hgrid.shape)
            vals = np.stack([np.cos(np.pi * z) + sign * 0.5, np.sin(np.pi * z) * sign])
            return to_spectral(Field3D(hgrid, vg, amplitude * vals))
        return State(make(vga, 1.0), make(vgo, -1.0), 0.0)
    if preset == "random":
        rng = _rng(seed)
        va = leray_average(random_smooth_field(rng, hgrid, vga, decay))
        vo = leray_average(random_smooth_field(rng, hgrid, vgo, decay))
        E = 0.5 * inner(va, va) + 0.5 * inner(vo, vo)
        scale = math.sqrt(amplitude / E) if E > 0 else 0.0
        return State(va * scale, vo * scale, 0.0)
    raise ValueError(f"unknown init preset {preset!r}")


# --- one step ------------------------------------------------------------------------

_SOLVERS: dict = {}


def _solver(hgrid, vgrid) -> HydrostaticStokesSolver:
    key = (hgrid, vgrid)
    if key not in _SOLVERS:
        _SOLVERS[key] = HydrostaticStokesSolver(hgrid, vgrid)
    return _SOLVERS[key]


def _drag_data(mode: DragMode, V_old: SurfaceField, V_k: SurfaceField, scheme: Scheme) -> SurfaceField:
    if mode is DragMode.OFF:
        return V_k * 0.0
    if mode is DragMode.LINEAR:
        return dealias(V_k)
    if mode is DragMode.EXPLICIT:
        return drag(V_old)
    if scheme is Scheme.CRANK_NICOLSON:
        return drag(V_k)
    return drag_semi_implicit(V_old, V_k)


def _norm(s: State) -> float:
    return math.sqrt(inner(s.va, s.va) + inner(s.vo, s.vo))


def step(state: State, cfg: StepConfig, forcing: tuple[Field3D, Field3D] | None = None,
         t_new: float | None = None) -> tuple[State, BudgetReport]:
    """Advance one step of size cfg.dt; raises StepFailure if the outer loop stalls."""
    s0 = state.spectral()
    hg = s0.hgrid
    vga, vgo = s0.va.vgrid, s0.vo.vgrid
    if forcing is None:
        forcing = (Field3D.zeros(hg, vga), Field3D.zeros(hg, vgo))
    fa, fo = to_spectral(forcing[0]), to_spectral(forcing[1])
    sa, so = _solver(hg, vga), _solver(hg, vgo)
    cn = cfg.scheme is Scheme.CRANK_NICOLSON
    V_old = relative_velocity(s0)
    D_old = _drag_data(cfg.drag_mode, V_old, V_old, cfg.scheme)
    if cn:
        old_a, old_o = neumann_data(D_old, cfg.p_s)
        expl_a = laplacian(s0.va, 0.0, old_a) - s0.va * cfg.lam
        expl_o = laplacian(s0.vo, 0.0, old_o) - s0.vo * cfg.lam
        dt_solve = 0.5 * cfg.dt
    else:
        dt_solve = cfg.dt

    cur = s0
    residuals = []
    for it in range(1, cfg.picard_max + 1):
        base = State(0.5 * (s0.va + cur.va), 0.5 * (s0.vo + cur.vo), s0.t) if cn else cur
        Na, No = _advection(base.va, cfg.advection), _advection(base.vo, cfg.advection)
        D = _drag_data(cfg.drag_mode, V_old, relative_velocity(cur), cfg.scheme)
        ba, bo = neumann_data(D, cfg.p_s)
        if cn:
            rhs_a, rhs_o = (fa + Na) * 2.0 + expl_a, (fo + No) * 2.0 + expl_o
        else:
            rhs_a, rhs_o = fa + Na, fo + No
        try:
            va = sa.solve_coupled(LinearData(f_v=rhs_a, v0=s0.va, dt=dt_solve, lam=cfg.lam, b_v_N_top=ba)).v
            vo = so.solve_coupled(LinearData(f_v=rhs_o, v0=s0.vo, dt=dt_solve, lam=cfg.lam, b_v_N_top=bo)).v
        except (DataError, ConvergenceError) as exc:
            raise StepFailure(f"linear solve failed: {exc}", residuals) from exc
        new = State(va, vo, s0.t + cfg.dt if t_new is None else t_new)
        diff = math.sqrt(inner(new.va - cur.va, new.va - cur.va) + inner(new.vo - cur.vo, new.vo - cur.vo))
        residuals.append(diff)
        if not math.isfinite(diff):
            raise StepFailure("non-finite iterate", residuals)
        cur = new
        if diff <= cfg.picard_tol * (1.0 + _norm(new)):
            break
    else:
        raise StepFailure(f"outer iteration did not converge in {cfg.picard_max} sweeps "
                          f"(last update {residuals[-1]:.3e})", residuals)

    if cn:
        pair = State(0.5 * (s0.va + cur.va), 0.5 * (s0.vo + cur.vo), cur.t)
        drag_eff = 0.5 * (D_old + D)
    else:
        pair, drag_eff = cur, D
    internals = StepInternals(
        dt=cfg.dt, lam=cfg.lam, p_s=cfg.p_s, pair=pair, drag_data=drag_eff, forcing=(fa, fo),
        advection=(Na, No), implicit_increment=not cn, picard_iterations=len(residuals),
    )
    return cur, energy_budget(s0, cur, internals)


def step_with_retry(state: State, cfg: StepConfig, forcing=None, t_new: float | None = None,
                    depth: int = 0) -> tuple[State, list[BudgetReport]]:
    """One step; on failure, two half steps (recursively, at most cfg.max_halvings deep)."""
    try:
        new, rep = step(state, cfg, forcing, t_new)
        return new, [rep]
    except StepFailure as exc:
        if depth >= cfg.max_halvings:
            raise
        log.warning("step at t=%.6g failed (%s); halving dt to %.3g", state.t, exc, cfg.dt / 2)
        half = dataclasses.replace(cfg, dt=cfg.dt / 2)
        mid, r1 = step_with_retry(state, half, forcing, None, depth + 1)
        end, r2 = step_with_retry(mid, half, forcing, t_new, depth + 1)
        return end, r1 + r2


# --- runs ---------------------------------------------------------------------------

@dataclasses.dataclass
class Trajectory:
    states: list[State] = dataclasses.field(default_factory=list)
    steps: list[int] = dataclasses.field(default_factory=list)
    budgets: list[BudgetReport] = dataclasses.field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> State:
        return self.states[-1]


def n_steps(t_end: float, dt: float) -> int:
    n = t_end / dt
    k = int(round(n))
    if abs(n - k) > 1e-9 * max(1.0, n):
        raise ValueError(f"t_end = {t_end} is not a whole number of steps of dt = {dt}")
    return k


def run(init: State, cfg: StepConfig, t_end: float, forcing=None, output_every: int = 1,
        start_step: int = 0, on_step=None) -> Trajectory:
    """Integrate from step ``start_step`` (time start_step * dt) to t_end.

    Time is always step_index * dt so an interrupted and resumed run
    reproduces the same arithmetic.
    """
    last = n_steps(t_end, cfg.dt)
    if last < start_step:
        raise ValueError(f"t_end = {t_end} lies before the start time {start_step * cfg.dt}")
    state = init.spectral()
    if forcing is None:
        forcing = (Field3D.zeros(state.hgrid, state.va.vgrid), Field3D.zeros(state.hgrid, state.vo.vgrid))
    traj = Trajectory([state], [start_step], [initial_report(state)])
    for n in range(start_step + 1, last + 1):
        state, reports = step_with_retry(state, cfg, forcing, t_new=n * cfg.dt)
        traj.budgets.extend(reports)
        if n % output_every == 0 or n == last:
            traj.states.append(state)
            traj.steps.append(n)
        if on_step is not None:
            on_step(n, state, reports)
    return traj
