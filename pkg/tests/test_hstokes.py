import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from caosim.calculus import div_h, fluctuation, grad_h, laplacian, vertical_average, vertical_operator
from caosim.domain import Field3D, HorizontalGrid, SurfaceField, VerticalGrid, to_spectral
from caosim.hstokes import (
    ConvergenceError, DataError, HydrostaticStokesSolver, LinearData, solve_barotropic, solve_coupled,
)
from caosim.stepper import leray_average

seeds = st.integers(0, 2**32 - 1)
HG = HorizontalGrid(8, 8)


def rand_field(rng, vg, hg=HG):
    return Field3D(hg, vg, rng.standard_normal((2, vg.nz) + hg.shape))


def rand_surf(rng, hg=HG):
    return SurfaceField(hg, rng.standard_normal((2,) + hg.shape))


def random_data(rng, vg, dirichlet=False, dt=0.01, lam=0.3):
    return LinearData(f_v=rand_field(rng, vg), v0=leray_average(rand_field(rng, vg)), dt=dt, lam=lam,
                      b_v_N_top=rand_surf(rng), b_v_N_bottom=rand_surf(rng),
                      b_v_D_bottom=rand_surf(rng) if dirichlet else None)


# --- reduction -------------------------------------------------------------------

def test_reduce_examples(ocean9):
    rng = np.random.default_rng(1)
    fv = rand_field(rng, ocean9)
    v0 = Field3D.zeros(HG, ocean9)
    s = HydrostaticStokesSolver(HG, ocean9)
    red = s.reduce(LinearData(f_v=fv, v0=v0, dt=1.0))
    np.testing.assert_allclose(red.g_v.values(), fv.values(), atol=1e-13)
    assert np.max(np.abs(red.g_div.data)) == 0
    one = Field3D.from_function(HG, ocean9, lambda x, y, z: 1.0 + 0 * x)
    red = s.reduce(LinearData(f_v=fv, v0=v0, dt=1.0, f_w=one))
    np.testing.assert_allclose(red.g_v.values(), fv.values(), atol=1e-13)
    cosx = Field3D.from_function(HG, ocean9, lambda x, y, z: np.cos(x) + 0 * z)
    red = s.reduce(LinearData(f_v=fv, v0=v0, dt=1.0, f_w=cosx))
    expect = fv.values() + Field3D.from_function(HG, ocean9, lambda x, y, z: ((z + 1) * np.sin(x), 0 * x)).values()
    np.testing.assert_allclose(red.g_v.values(), expect, atol=1e-13)


def test_reduce_compatibility_errors(ocean9):
    rng = np.random.default_rng(2)
    s = HydrostaticStokesSolver(HG, ocean9)
    with pytest.raises(DataError, match="initial data"):
        s.reduce(LinearData(f_v=rand_field(rng, ocean9), v0=rand_field(rng, ocean9), dt=1.0))
    ones = SurfaceField.from_function(HG, lambda x, y: 1.0 + 0 * x)
    with pytest.raises(DataError, match="mean"):
        s.reduce(LinearData(f_v=rand_field(rng, ocean9), v0=Field3D.zeros(HG, ocean9), dt=1.0, b_w_a=ones))
    with pytest.raises(DataError):
        LinearData(f_v=rand_field(rng, ocean9), v0=Field3D.zeros(HG, ocean9), dt=0.0)
    with pytest.raises(DataError):
        LinearData(f_v=rand_field(rng, ocean9), v0=Field3D.zeros(HG, ocean9), dt=1.0, lam=-1.0)


# --- barotropic ------------------------------------------------------------------

def zero_surf(ncomp=2):
    return SurfaceField(HG, np.zeros((ncomp,) + HG.shape))


def test_barotropic_gradient_rhs():
    q = SurfaceField.from_function(HG, lambda x, y: np.cos(x) * np.sin(2 * y) + 3.0)
    vbar, pi = solve_barotropic(grad_h(q), zero_surf(1), zero_surf(), 0.5, 0.1)
    assert np.max(np.abs(vbar.values())) < 1e-14
    np.testing.assert_allclose(pi.values(), q.values() - 3.0, atol=1e-14)


def test_barotropic_pure_decay():
    prev = leray_average(rand_field(np.random.default_rng(3), VerticalGrid.ocean(3)))
    prev = vertical_average(prev)
    dt, lam = 0.1, 0.5
    vbar, pi = solve_barotropic(zero_surf(), zero_surf(1), prev, lam, dt)
    np.testing.assert_allclose(vbar.data, prev.data / (1 + dt * (HG.k2 + lam)), atol=1e-15)
    assert np.max(np.abs(pi.data)) < 1e-15


@given(seed=seeds)
def test_barotropic_manufactured(seed):
    rng = np.random.default_rng(seed)
    vbar = vertical_average(leray_average(rand_field(rng, VerticalGrid.ocean(3))))
    pi = to_spectral(SurfaceField(HG, rng.standard_normal((1,) + HG.shape)))
    pi = pi.with_data(pi.data * (HG.k2 > 0), spectral=True)
    dt, lam = 0.05, 0.2
    c = 1 / dt + HG.k2 + lam
    rhs = SurfaceField(HG, c * vbar.data + grad_h(pi).data, True)
    got_v, got_pi = solve_barotropic(rhs, zero_surf(1), zero_surf(), lam, dt)
    np.testing.assert_allclose(got_v.data, vbar.data, atol=1e-12)
    np.testing.assert_allclose(got_pi.data, pi.data, atol=1e-12)


# --- baroclinic ------------------------------------------------------------------

def test_baroclinic_trivial(ocean9):
    s = HydrostaticStokesSolver(HG, ocean9)
    z = Field3D.zeros(HG, ocean9)
    assert np.max(np.abs(s.solve_baroclinic(z, None, None, z, 0.0, 1.0).data)) == 0
    const = Field3D.from_function(HG, ocean9, lambda x, y, z: (2.0 + 0 * z, -1.0 + 0 * z))
    out = s.solve_baroclinic(fluctuation(const), None, None, z, 0.0, 1.0)
    assert np.max(np.abs(out.data)) < 1e-14


def test_baroclinic_second_order():
    errs = []
    dt, lam = 1.0, 0.0
    for nz in (9, 17, 33, 65):
        vg = VerticalGrid.ocean(nz)
        s = HydrostaticStokesSolver(HG, vg)
        # v~ = cos(pi z) cos x (zero vertical mean); Neumann data dv/dz = 0 at both ends
        exact = Field3D.from_function(HG, vg, lambda x, y, z: (np.cos(np.pi * z) * np.cos(x), 0 * x))
        c = 1 / dt + 1 + lam
        rhs = Field3D.from_function(HG, vg, lambda x, y, z: ((c + np.pi**2) * np.cos(np.pi * z) * np.cos(x), 0 * x))
        rhs = fluctuation(to_spectral(rhs)) - fluctuation(to_spectral(exact)) * (1 / dt)
        got = s.solve_baroclinic(rhs, None, None, fluctuation(to_spectral(exact)), lam, dt)
        errs.append(np.max(np.abs(got.values() - fluctuation(exact).values())))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    assert min(orders) > 1.9


# --- coupled ---------------------------------------------------------------------

GRIDS = [VerticalGrid.ocean(9), VerticalGrid.atmosphere(7)]


@pytest.mark.parametrize("vg,dirichlet", [(GRIDS[0], False), (GRIDS[0], True), (GRIDS[1], False)],
                         ids=["ocean-neumann", "ocean-dirichlet", "atmosphere"])
def test_coupled_matches_dense_oracle(vg, dirichlet):
    rng = np.random.default_rng(4)
    data = random_data(rng, vg, dirichlet, lam=0.3)
    data = LinearData(f_v=data.f_v, v0=Field3D.zeros(HG, vg), dt=0.01, lam=0.3, b_v_N_top=data.b_v_N_top,
                      b_v_N_bottom=data.b_v_N_bottom, b_v_D_bottom=data.b_v_D_bottom)
    sol = HydrostaticStokesSolver(HG, vg).solve_coupled(data)
    op = vertical_operator(vg)
    K, w, n = op.K, op.weights, vg.nz
    for ix, iy in [(2, 3), (1, 0), (4, 7)]:
        kx, ky = HG.kx[ix, iy], HG.ky[ix, iy]
        c = 100 + kx**2 + ky**2 + 0.3
        R = data.f_v.coeffs()[:, :, ix, iy]
        Fb, Ft = op.flux(data.b_v_N_bottom.coeffs()[:, ix, iy], data.b_v_N_top.coeffs()[:, ix, iy])
        N = 2 * n + 1 + (2 if dirichlet else 0)
        A = np.zeros((N, N), complex)
        rhs = np.zeros(N, complex)
        for j, k in enumerate([kx, ky]):
            sl = slice(j * n, (j + 1) * n)
            A[sl, sl] = c * np.eye(n) - K / w[:, None]
            A[sl, 2 * n] = 1j * k
            rhs[sl] = R[j]
            rhs[j * n + n - 1] += Ft[j] / w[-1]
            if dirichlet:
                A[j * n, 2 * n + 1 + j] = 1 / w[0]
                A[2 * n + 1 + j, :] = 0
                A[2 * n + 1 + j, j * n] = 1
                rhs[2 * n + 1 + j] = data.b_v_D_bottom.coeffs()[j, ix, iy]
            else:
                rhs[j * n] -= Fb[j] / w[0]
            A[2 * n, sl] = 1j * k * w / vg.length
        x = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(sol.v.data[0, :, ix, iy], x[:n], atol=1e-13)
        np.testing.assert_allclose(sol.v.data[1, :, ix, iy], x[n:2 * n], atol=1e-13)
        assert abs(sol.pi_s.data[0, ix, iy] - x[2 * n]) < 1e-12


@pytest.mark.parametrize("dirichlet", [False, True])
def test_discrete_equations_hold(ocean9, dirichlet):
    rng = np.random.default_rng(5)
    data = random_data(rng, ocean9, dirichlet)
    sol = HydrostaticStokesSolver(HG, ocean9).solve_coupled(data)
    v = sol.v
    top = data.b_v_N_top
    bottom = sol.flux_bottom if dirichlet else data.b_v_N_bottom
    lap = laplacian(v, bottom, top)
    from caosim.calculus import extend
    lhs = (v - to_spectral(data.v0)) * (1 / data.dt) - lap + v * data.lam + extend(grad_h(sol.pi_s), v)
    if not dirichlet:
        np.testing.assert_allclose(lhs.data, to_spectral(data.f_v).data, atol=1e-9)
    else:
        np.testing.assert_allclose(lhs.data[:, 1:], to_spectral(data.f_v).data[:, 1:], atol=1e-9)
        np.testing.assert_allclose(v.values()[:, 0], data.b_v_D_bottom.values(), atol=1e-12)
    assert np.max(np.abs(div_h(vertical_average(v)).data)) < 1e-12


@given(seed=seeds, dirichlet=st.booleans())
def test_direct_iterative_agree(seed, dirichlet):
    rng = np.random.default_rng(seed)
    vg = VerticalGrid.ocean(9)
    data = random_data(rng, vg, dirichlet)
    s = HydrostaticStokesSolver(HG, vg)
    a, b = s.solve_coupled(data, "direct"), s.solve_coupled(data, "iterative")
    np.testing.assert_allclose(a.v.data, b.v.data, atol=1e-10)
    np.testing.assert_allclose(a.pi_s.data, b.pi_s.data, atol=1e-10)


def test_neumann_data_converges_in_one_sweep(ocean9):
    data = random_data(np.random.default_rng(6), ocean9)
    sol = HydrostaticStokesSolver(HG, ocean9).solve_coupled(data, "iterative")
    assert sol.iterations == 1


def test_picard_geometric_on_reference_grid():
    hg, vg = HorizontalGrid(16, 16), VerticalGrid.ocean(16)
    rng = np.random.default_rng(7)
    data = LinearData(f_v=rand_field(rng, vg, hg), v0=Field3D.zeros(hg, vg), dt=1e-2,
                      b_v_N_top=rand_surf(rng, hg), b_v_D_bottom=rand_surf(rng, hg))
    sol = HydrostaticStokesSolver(hg, vg).solve_coupled(data, "iterative")
    r = np.array(sol.residuals)
    assert np.all(r[1:] / r[:-1] < 0.9)
    assert r[-1] <= 1e-10


def test_convergence_error_reports_residuals(ocean9):
    data = random_data(np.random.default_rng(8), ocean9, dirichlet=True)
    s = HydrostaticStokesSolver(HG, ocean9, picard_max=2)
    with pytest.raises(ConvergenceError) as err:
        s.solve_coupled(data, "iterative")
    assert len(err.value.residuals) == 2


@given(seed=seeds, alpha=st.floats(-3, 3))
def test_linearity(seed, alpha):
    rng = np.random.default_rng(seed)
    vg = VerticalGrid.atmosphere(6)
    d1, d2 = random_data(rng, vg), random_data(rng, vg)
    s1, s2 = solve_coupled(d1), solve_coupled(d2)
    s12 = solve_coupled(d1 + d2.scaled(alpha))
    np.testing.assert_allclose(s12.v.data, s1.v.data + alpha * s2.v.data, atol=1e-10)
    np.testing.assert_allclose(s12.pi_s.data, s1.pi_s.data + alpha * s2.pi_s.data, atol=1e-9)


def test_vertical_velocity_and_pressure(ocean9):
    data = random_data(np.random.default_rng(9), ocean9)
    s = HydrostaticStokesSolver(HG, ocean9)
    sol = s.solve_coupled(data)
    w = s.vertical_velocity(sol, data)
    assert np.max(np.abs(w.values()[:, -1])) < 1e-12
    p = s.pressure(sol, data)
    np.testing.assert_allclose(p.values()[0, 3], sol.pi_s.values()[0], atol=1e-13)
