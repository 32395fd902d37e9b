import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from caosim.domain import Field3D, HorizontalGrid, SurfaceField, VerticalGrid
from caosim.norms import (
    NormParameterError, NormSpec, besov_spatial_norm, boundary_space_norm, check_params, cutoff,
    dyadic_multipliers, h2beta_norm, h2q_norm, lp_blocks, lq_norm, maxreg_norm, n_blocks, space_blocks,
    time_blocks, triebel_lizorkin_norm, weighted_lp_norm,
)

seeds = st.integers(0, 2**32 - 1)
HG = HorizontalGrid(8, 8)


def test_weighted_lp_examples():
    t = np.linspace(0.001, 1, 1000)
    assert weighted_lp_norm(np.full_like(t, 3.0), t, 2, 1.0) == pytest.approx(3.0, rel=1e-12)
    t = np.linspace(1e-4, 1, 20001)
    assert weighted_lp_norm(np.ones_like(t), t, 2, 0.75) == pytest.approx(math.sqrt(2 / 3), rel=1e-4)


@given(seed=seeds, lam=st.floats(0.01, 100), p=st.floats(1.5, 6))
def test_weighted_lp_homogeneous(seed, lam, p):
    t = np.linspace(0.1, 2, 30)
    u = np.random.default_rng(seed).standard_normal(30)
    assert weighted_lp_norm(lam * u, t, p, 1.0) == pytest.approx(lam * weighted_lp_norm(u, t, p, 1.0), rel=1e-12)


@pytest.mark.parametrize("p,mu", [(1.0, 1.0), (math.inf, 1.0), (2.0, 0.5), (2.0, 1.2), (4.0, 0.2)])
def test_parameter_validation(p, mu):
    with pytest.raises(NormParameterError):
        check_params(p, mu)
    with pytest.raises(NormParameterError):
        NormSpec(0.0, p, 2.0, mu)
    with pytest.raises(NormParameterError):
        weighted_lp_norm([1.0, 1.0], [0.5, 1.0], p, mu)


def test_cutoff_shape():
    xi = np.array([0, 0.5, 1.0, 1.25, 1.5, 2.0, -1.2])
    c = cutoff(xi)
    assert c[0] == c[1] == c[2] == 1.0 and c[4] == c[5] == 0.0
    assert c[3] == pytest.approx(0.5)
    assert c[6] == cutoff(np.array([1.2]))[0]
    r = np.linspace(1, 1.5, 101)
    assert np.all(np.diff(cutoff(r)) <= 0)


@given(K=st.integers(0, 14))
def test_partition_of_unity(K):
    xi = np.linspace(0, 2.0 ** (K + 2), 5001)
    m = dyadic_multipliers(xi, K)
    assert m.shape[0] == K + 1
    assert np.max(np.abs(m.sum(0) - 1.0)) <= 1e-12
    assert np.all(m >= -1e-15) and np.all(m <= 1 + 1e-15)


def test_block_examples():
    tau = 0.01
    times = tau * np.arange(1, 4097)
    dec = time_blocks(np.full(times.shape, 2.0), times)
    assert dec.K == n_blocks(np.pi / tau) == 8
    # constant: after zero extension most energy stays in block 0
    assert np.max(np.abs(dec.reconstruct() - 2.0)) < 1e-12
    # a spatial constant lives in block 0 only
    sd = space_blocks(SurfaceField.from_function(HG, lambda x, y: 1.5 + 0 * x))
    np.testing.assert_allclose(sd.blocks[0], 1.5, atol=1e-14)
    assert np.max(np.abs(sd.blocks[1:])) < 1e-14
    # spatial tone at |kappa| = 2 sits in block 1 only (phi(1) = 1, phi(2) = 0)
    sd = space_blocks(SurfaceField.from_function(HG, lambda x, y: np.cos(2 * x)))
    assert np.max(np.abs(sd.blocks[0])) < 1e-14 and np.max(np.abs(sd.blocks[2:])) < 1e-14
    with pytest.raises(ValueError):
        lp_blocks(np.zeros(4), "diagonal")


@given(seed=seeds, M=st.integers(8, 300))
def test_time_reconstruction(seed, M):
    times = 0.02 * np.arange(1, M + 1)
    f = np.random.default_rng(seed).standard_normal((M, 3))
    dec = lp_blocks(f, "time", times)
    assert np.max(np.abs(dec.reconstruct() - f)) <= 1e-12 * max(1.0, np.max(np.abs(f)))


@given(seed=seeds)
def test_space_reconstruction(seed):
    f = SurfaceField(HG, np.random.default_rng(seed).standard_normal((2, 8, 8)))
    assert np.max(np.abs(lp_blocks(f, "space").reconstruct() - f.values())) <= 1e-12


def tone_path(k, tau=0.01, T=8 * np.pi):
    times = tau * np.arange(1, int(round(T / tau)) + 1)
    g = SurfaceField.from_function(HG, lambda x, y: (np.cos(x) + 0.5, np.sin(y))).values()
    return times, np.cos(2.0**k * times)[:, None, None, None] * g[None], g


def test_triebel_lizorkin_examples():
    times, path, g = tone_path(4)
    assert triebel_lizorkin_norm(np.zeros_like(path), times, NormSpec(0.5, 2, 2), HG) == 0.0
    lq = math.sqrt(float(np.sum(g**2)) * HG.cell_area)
    ref = 2 ** (4 * 0.5) * weighted_lp_norm(np.cos(16 * times), times, 2, 1.0) * lq
    assert triebel_lizorkin_norm(path, times, NormSpec(0.5, 2, 2), HG) == pytest.approx(ref, rel=0.05)


@given(seed=seeds, s1=st.floats(0, 1), ds=st.floats(0, 1))
def test_triebel_lizorkin_monotone_in_s(seed, s1, ds):
    times = 0.05 * np.arange(1, 81)
    rng = np.random.default_rng(seed)
    path = rng.standard_normal((80, 2, 8, 8))
    a = triebel_lizorkin_norm(path, times, NormSpec(s1, 2, 2), HG)
    b = triebel_lizorkin_norm(path, times, NormSpec(s1 + ds, 2, 2), HG)
    assert a <= b * (1 + 1e-12)


def test_besov_examples():
    z = SurfaceField(HG, np.zeros((2, 8, 8)))
    assert besov_spatial_norm(z, 0.5, 2) == 0.0
    f = SurfaceField.from_function(HG, lambda x, y: (np.cos(2 * x), 0 * x))
    lq = math.sqrt(float(np.sum(f.values() ** 2)) * HG.cell_area)
    assert besov_spatial_norm(f, 0.5, 2) == pytest.approx(2**0.5 * lq, rel=1e-12)
    assert besov_spatial_norm(f * 3.0, 0.5, 2) == pytest.approx(3 * besov_spatial_norm(f, 0.5, 2), rel=1e-12)
    with pytest.raises(NormParameterError):
        besov_spatial_norm(f, 0.5, 1.0)


def test_boundary_space_norm():
    times = np.linspace(0.05, 1, 20)
    zero = np.zeros((20, 2, 8, 8))
    assert boundary_space_norm(zero, times, 4, 2, 1.0, HG) == (0.0, 0.0)
    rng = np.random.default_rng(1)
    B = rng.standard_normal((20, 2, 8, 8))
    a = boundary_space_norm(B, times, 4, 2, 1.0, HG)
    b = boundary_space_norm(4 * B, times, 4, 2, 1.0, HG)
    np.testing.assert_allclose(b, 4 * np.array(a), rtol=1e-12)


def test_spatial_norms():
    vg = VerticalGrid.ocean(9)
    one = Field3D.from_function(HG, vg, lambda x, y, z: (1.0 + 0 * x, 0 * x))
    assert lq_norm(one, 2) == pytest.approx(2 * math.pi, rel=1e-12)  # |Omega| = 4 pi^2
    assert lq_norm(one, math.inf) == 1.0
    assert h2q_norm(one, 2) == pytest.approx(lq_norm(one, 2), rel=1e-12)
    f = Field3D.from_function(HG, vg, lambda x, y, z: (np.cos(x) * (1 + z), 0 * x))
    assert h2beta_norm(f, 2, 0.0) == pytest.approx(lq_norm(f, 2))
    assert h2beta_norm(f, 2, 1.0) == pytest.approx(h2q_norm(f, 2))
    with pytest.raises(NormParameterError):
        h2beta_norm(f, 2, 1.5)


def test_maxreg_examples():
    vg = VerticalGrid.ocean(5)
    times = np.linspace(0.1, 1, 10)
    assert maxreg_norm([Field3D.zeros(HG, vg)] * 10, times, 2, 2, 1.0, HG, vg) == 0.0
    g = Field3D.from_function(HG, vg, lambda x, y, z: (np.cos(x) + 0 * z, 0 * x))
    path = [g * t for t in times]
    val = maxreg_norm(path, times, 2, 2, 1.0, HG, vg)
    dt_part = lq_norm(g, 2) * weighted_lp_norm(np.ones(10), times, 2, 1.0)
    h2_part = weighted_lp_norm([h2q_norm(g * t, 2) for t in times], times, 2, 1.0)
    assert val == pytest.approx(dt_part + h2_part, rel=1e-12)
    assert maxreg_norm([f * 2.0 for f in path], times, 2, 2, 1.0, HG, vg) == pytest.approx(2 * val, rel=1e-12)
    with pytest.raises(ValueError):
        maxreg_norm(path[:2], times[:2], 2, 2, 1.0, HG, vg)


def test_nonuniform_times_rejected():
    with pytest.raises(ValueError):
        time_blocks(np.zeros(3), [0.1, 0.2, 0.4])
