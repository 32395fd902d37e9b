import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from caosim.calculus import (
    cumulative_integral, curl_h, d2_vertical, d_vertical, delta_a, div_h, extend, fluctuation, grad_h, inner,
    l2_norm, laplace_h, sbp_derivative, vertical_average, vertical_diffusion, vertical_operator,
)
from caosim.domain import Field3D, HorizontalGrid, SurfaceField, VerticalGrid

seeds = st.integers(0, 2**32 - 1)


def surf(hg, fn):
    return SurfaceField.from_function(hg, fn)


def test_grad_examples(hg8):
    g = grad_h(surf(hg8, lambda x, y: np.cos(x))).values()
    x, y = hg8.mesh
    np.testing.assert_allclose(g[0], -np.sin(x), atol=1e-14)
    np.testing.assert_allclose(g[1], 0, atol=1e-14)
    assert np.max(np.abs(grad_h(surf(hg8, lambda x, y: 0 * x + 2.0)).values())) < 1e-15
    g = grad_h(surf(hg8, lambda x, y: np.sin(x) * np.cos(y))).values()
    np.testing.assert_allclose(g[0], np.cos(x) * np.cos(y), atol=1e-14)
    np.testing.assert_allclose(g[1], -np.sin(x) * np.sin(y), atol=1e-14)


@given(seed=seeds)
def test_div_grad_is_laplace(seed):
    hg = HorizontalGrid(10, 8)
    f = SurfaceField(hg, np.random.default_rng(seed).standard_normal((10, 8)))
    np.testing.assert_allclose(div_h(grad_h(f)).data, laplace_h(f).data, atol=1e-13)


@given(seed=seeds)
def test_div_of_curl_field_vanishes(seed):
    hg = HorizontalGrid(8, 8)
    psi = SurfaceField(hg, np.random.default_rng(seed).standard_normal((8, 8)))
    g = grad_h(psi).coeffs()
    v = SurfaceField(hg, np.stack([-g[1], g[0]]), spectral=True)
    assert np.max(np.abs(div_h(v).data)) < 1e-13
    assert np.max(np.abs(curl_h(grad_h(psi)).data)) < 1e-13


def test_div_example(hg8):
    v = surf(hg8, lambda x, y: (np.sin(y), np.sin(x)))
    assert np.max(np.abs(div_h(v).values())) < 1e-14


def test_d_vertical_exactness(hg8):
    vg = VerticalGrid.ocean(9)
    f = Field3D.from_function(hg8, vg, lambda x, y, z: z + 0 * x)
    np.testing.assert_allclose(d_vertical(f).values(), 1.0, atol=1e-13)
    f2 = Field3D.from_function(hg8, vg, lambda x, y, z: z**2 + 0 * x)
    z = vg.nodes[1:-1]
    np.testing.assert_allclose(d_vertical(f2).values()[0, 1:-1, 0, 0], 2 * z, atol=1e-13)
    np.testing.assert_allclose(d2_vertical(f2).values()[0, 1:-1], 2.0, atol=1e-11)


def test_d_vertical_second_order():
    hg = HorizontalGrid(4, 4)
    errs = []
    for nz in (9, 17, 33, 65):
        vg = VerticalGrid.ocean(nz)
        f = Field3D.from_function(hg, vg, lambda x, y, z: np.sin(np.pi * z) + 0 * x)
        exact = np.pi * np.cos(np.pi * vg.nodes)
        errs.append(np.max(np.abs(d_vertical(f).values()[0, :, 0, 0] - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    assert min(orders) > 1.9


def test_delta_a_examples(hg8):
    vg = VerticalGrid.atmosphere(9)
    v = Field3D.from_function(hg8, vg, lambda x, y, p: np.cos(x) + 0 * p)
    np.testing.assert_allclose(delta_a(v).values(), laplace_h(v).values(), atol=1e-12)
    c = Field3D.from_function(hg8, vg, lambda x, y, p: 3.0 + 0 * x)
    assert np.max(np.abs(delta_a(c).values())) < 1e-12
    # v = log p: d/dp(p^2 / p) = 1, Neumann data 1/p at the ends
    errs, interior = [], []
    for nz in (9, 17, 33):
        vg = VerticalGrid.atmosphere(nz)
        lp = Field3D.from_function(hg8, vg, lambda x, y, p: np.log(p) + 0 * x)
        out = delta_a(lp, 1 / vg.nodes[0], 1 / vg.nodes[-1]).values()
        errs.append(np.max(np.abs(out - 1.0)))
        interior.append(np.max(np.abs(out[:, 1:-1] - 1.0)))
    assert interior[1] / interior[2] > 3.5
    # boundary rows carry half cells and are first order; interior rows second order
    assert errs[0] < 5e-2 and errs[1] / errs[2] > 1.9


def test_vertical_average_examples(hg8, ocean9):
    z = Field3D.from_function(hg8, ocean9, lambda x, y, z: z + 0 * x)
    np.testing.assert_allclose(vertical_average(z).values(), -0.5, atol=1e-15)
    c = Field3D.from_function(hg8, ocean9, lambda x, y, z: 2.5 + 0 * x)
    np.testing.assert_allclose(vertical_average(c).values(), 2.5)
    assert np.max(np.abs(fluctuation(c).values())) < 1e-15
    errs = []
    for nz in (9, 17):
        f = Field3D.from_function(hg8, VerticalGrid.ocean(nz), lambda x, y, z: z**2 + 0 * x)
        errs.append(np.max(np.abs(vertical_average(f).values() - 1 / 3)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-6)


@given(seed=seeds, nz=st.integers(3, 12))
def test_splitting_properties(seed, nz):
    rng = np.random.default_rng(seed)
    hg, vg = HorizontalGrid(4, 4), VerticalGrid.atmosphere(nz)
    f = Field3D(hg, vg, rng.standard_normal((2, nz, 4, 4)))
    avg = vertical_average(f)
    fl = fluctuation(f)
    assert np.max(np.abs(vertical_average(fl).data)) < 1e-13
    np.testing.assert_allclose((fl + extend(avg, f)).data, f.data, atol=1e-13)
    # orthogonality of mean and fluctuation
    assert abs(inner(fl, extend(avg, f))) < 1e-10 * (1 + l2_norm(f) ** 2)


@given(seed=seeds, nz=st.integers(3, 16), atm=st.booleans())
def test_summation_by_parts(seed, nz, atm):
    rng = np.random.default_rng(seed)
    vg = VerticalGrid.atmosphere(nz, 1.3) if atm else VerticalGrid.ocean(nz)
    op = vertical_operator(vg)
    u, v = rng.standard_normal(nz), rng.standard_normal(nz)
    # <L v, u>_H = -D(u, v) + boundary terms; symmetric negative semidefinite
    K = op.K
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.max(np.linalg.eigvalsh(K)) < 1e-10
    fb, ft = rng.standard_normal(2)
    lhs = np.dot(op.weights * op.apply(v.reshape(1, nz, 1, 1), fb, ft).ravel(), u)
    rhs = u @ K @ v + u[-1] * ft - u[0] * fb
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_vertical_diffusion_flux_form(hg8, ocean9):
    # constant-gradient profile with matching Neumann data is exact
    f = Field3D.from_function(hg8, ocean9, lambda x, y, z: 2 * z + 0 * x)
    np.testing.assert_allclose(vertical_diffusion(f, 2.0, 2.0).values(), 0.0, atol=1e-12)


@given(seed=seeds, nz=st.integers(3, 10))
def test_sbp_derivative_skew(seed, nz):
    rng = np.random.default_rng(seed)
    vg = VerticalGrid.ocean(nz)
    u = rng.standard_normal((1, nz, 1, 1))
    v = rng.standard_normal((1, nz, 1, 1))
    w = vg.weights
    Du, Dv = sbp_derivative(u, vg), sbp_derivative(v, vg)
    lhs = np.sum(w * (Du * v).ravel()) + np.sum(w * (u * Dv).ravel())
    boundary = u.ravel()[-1] * v.ravel()[-1] - u.ravel()[0] * v.ravel()[0]
    assert lhs == pytest.approx(boundary, abs=1e-12)


def test_cumulative_integral(hg8, ocean9):
    f = Field3D.from_function(hg8, ocean9, lambda x, y, z: 1.0 + 0 * x)
    np.testing.assert_allclose(cumulative_integral(f).values()[0, :, 0, 0], ocean9.nodes + 1, atol=1e-15)
