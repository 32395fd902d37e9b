"""Weighted time norms, Littlewood-Paley blocks and Triebel-Lizorkin / Besov norms.

Dyadic multipliers are built from the smooth cutoff

    phi(xi) = 1 for |xi| <= 1,  0 for |xi| >= 3/2,  h((3/2 - |xi|) / (1/2)) between,

with h(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}). Block 0 is phi, block k
is phi(2^-k xi) - phi(2^-k+1 xi), and the last resolved block K takes the
remainder 1 - phi(2^-K+1 xi) so the blocks sum to one on the grid.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .calculus import d2_vertical, laplace_h
from .domain import Field3D, HorizontalGrid, SurfaceField, to_physical, to_spectral


class NormParameterError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class NormSpec:
    s: float
    p: float
    q: float
    mu: float = 1.0

    def __post_init__(self):
        check_params(self.p, self.mu, self.q)


def check_params(p, mu, q=None):
    if not 1 < p < math.inf:
        raise NormParameterError(f"p must lie in (1, inf) (got {p})")
    if not 1.0 / p < mu <= 1.0:
        raise NormParameterError(f"mu must lie in (1/p, 1] (got mu={mu}, p={p})")
    if q is not None and not q > 1:
        raise NormParameterError(f"q must lie in (1, inf] (got {q})")


def _h(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def cutoff(xi):
    """The smooth cutoff phi on |xi|."""
    r = np.abs(np.asarray(xi, dtype=float))
    return np.where(r <= 1.0, 1.0, np.where(r >= 1.5, 0.0, _h((1.5 - r) / 0.5)))


def n_blocks(xi_max: float) -> int:
    """K = floor(log2 xi_max), at least 0."""
    if xi_max < 2:
        return 0
    return int(math.floor(math.log2(xi_max)))


def dyadic_multipliers(xi, K: int) -> np.ndarray:
    """Stack of K + 1 multipliers evaluated at |xi|; they sum to 1."""
    r = np.abs(np.asarray(xi, dtype=float))
    if K == 0:
        return np.ones((1,) + r.shape)
    out = [cutoff(r)]
    for k in range(1, K):
        out.append(cutoff(r / 2**k) - cutoff(r / 2 ** (k - 1)))
    out.append(1.0 - cutoff(r / 2 ** (K - 1)))
    return np.stack(out)


@dataclasses.dataclass(frozen=True)
class LPDecomposition:
    blocks: np.ndarray  # (K + 1, *shape of f)
    K: int

    def reconstruct(self) -> np.ndarray:
        return self.blocks.sum(axis=0)


def weighted_lp_norm(series, times, p: float, mu: float = 1.0) -> float:
    """(int_0^T t^{p(1-mu)} |u(t)|^p dt)^{1/p} by the trapezoid rule.

    ``series`` holds |u(t)| (or a norm of u(t)) at ``times``. Samples are
    assumed on (0, T]; the value at t = 0 is extended as a constant.
    """
    check_params(p, mu)
    u = np.abs(np.asarray(series, dtype=float))
    t = np.asarray(times, dtype=float)
    if u.shape != t.shape or u.ndim != 1:
        raise ValueError("series and times must be 1D arrays of equal length")
    if t[0] > 0:
        t = np.concatenate([[0.0], t])
        u = np.concatenate([[u[0]], u])
    return float(np.trapezoid(t ** (p * (1.0 - mu)) * u**p, t) ** (1.0 / p))


def _time_step(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two time samples")
    tau = t[1] - t[0]
    if not np.allclose(np.diff(t), tau, rtol=1e-9, atol=0):
        raise ValueError("time samples must be uniform")
    return float(tau)


def time_blocks(f: np.ndarray, times) -> LPDecomposition:
    """Blocks along axis 0 (time), using angular frequency and zero extension."""
    tau = _time_step(times)
    M = f.shape[0]
    nfft = 1 << int(math.ceil(math.log2(2 * M)))
    omega = 2 * np.pi * np.fft.rfftfreq(nfft, d=tau)
    K = n_blocks(np.pi / tau)
    mult = dyadic_multipliers(omega, K)
    F = np.fft.rfft(f, n=nfft, axis=0)
    shape = (-1,) + (1,) * (f.ndim - 1)
    blocks = np.stack([np.fft.irfft(m.reshape(shape) * F, n=nfft, axis=0)[:M] for m in mult])
    return LPDecomposition(blocks, K)


def space_blocks(f: SurfaceField) -> LPDecomposition:
    """Horizontal blocks on |kappa|; returns physical values of shape (K+1, ncomp, nx, ny)."""
    g = to_spectral(f)
    hg = g.hgrid
    K = n_blocks(float(hg.kmag.max()))
    mult = dyadic_multipliers(hg.kmag, K)
    blocks = np.stack([to_physical(g.with_data(m[None] * g.data)).data for m in mult])
    return LPDecomposition(blocks, K)


def lp_blocks(f, axis: str = "time", times=None) -> LPDecomposition:
    if axis == "time":
        return time_blocks(np.asarray(f, dtype=float), times)
    if axis in ("space", "horizontal"):
        return space_blocks(f)
    raise ValueError(f"unknown axis {axis!r}")


def _lq_surface(values: np.ndarray, q: float, hgrid: HorizontalGrid) -> np.ndarray:
    """L^q(G) norm over the last three axes (component, x, y)."""
    mod = np.sqrt(np.sum(values**2, axis=-3))
    if math.isinf(q):
        return mod.max(axis=(-2, -1))
    return (np.sum(mod**q, axis=(-2, -1)) * hgrid.cell_area) ** (1.0 / q)


def _lq_sequence(terms: np.ndarray, q: float) -> np.ndarray:
    if math.isinf(q):
        return terms.max(axis=0)
    return np.sum(terms**q, axis=0) ** (1.0 / q)


def triebel_lizorkin_norm(path: np.ndarray, times, spec: NormSpec, hgrid: HorizontalGrid) -> float:
    """F^s_{p,q,mu}(0, T; L^q(G)) norm of a path of surface values.

    ``path`` has shape (M, ncomp, nx, ny) in physical space.
    """
    path = np.asarray(path, dtype=float)
    dec = time_blocks(path, times)
    weights = 2.0 ** (spec.s * np.arange(dec.K + 1))
    per_block = _lq_surface(dec.blocks, spec.q, hgrid)  # (K+1, M)
    inner = _lq_sequence(weights[:, None] * per_block, spec.q)
    return weighted_lp_norm(inner, times, spec.p, spec.mu)


def besov_spatial_norm(f: SurfaceField, s: float, q: float) -> float:
    if not q > 1:
        raise NormParameterError(f"q must lie in (1, inf) (got {q})")
    dec = space_blocks(f)
    terms = 2.0 ** (s * np.arange(dec.K + 1)) * _lq_surface(dec.blocks, q, f.hgrid)
    return float(_lq_sequence(terms, q))


def boundary_space_norm(B_path: np.ndarray, times, p: float, q: float, mu: float,
                        hgrid: HorizontalGrid) -> tuple[float, float]:
    """(F^{1/2 - 1/(2q)}_{pq,mu}(L^q) part, L^p_mu(B^{1-1/q}_{qq}) part) of a drag path."""
    check_params(p, mu, q)
    B_path = np.asarray(B_path, dtype=float)
    f_part = triebel_lizorkin_norm(B_path, times, NormSpec(0.5 - 0.5 / q, p, q, mu), hgrid)
    besov = [besov_spatial_norm(SurfaceField(hgrid, b), 1.0 - 1.0 / q, q) for b in B_path]
    return f_part, weighted_lp_norm(besov, times, p, mu)


def lq_norm(f: Field3D, q: float) -> float:
    """L^q(Omega) of |f| with trapezoid weights in the vertical."""
    vals = f.values()
    mod = np.sqrt(np.sum(vals**2, axis=0))
    if math.isinf(q):
        return float(mod.max())
    w = f.vgrid.weights[:, None, None]
    return float((np.sum(w * mod**q) * f.hgrid.cell_area) ** (1.0 / q))


def h2q_norm(f: Field3D, q: float) -> float:
    """Discrete H^{2,q} proxy ||f||_q + ||Delta_H f||_q + ||d_xi^2 f||_q."""
    g = to_spectral(f)
    return lq_norm(g, q) + lq_norm(laplace_h(g), q) + lq_norm(d2_vertical(g), q)


def h2beta_norm(f: Field3D, q: float, beta: float) -> float:
    """H^{2 beta, q} proxy by interpolation between L^q and the H^{2,q} proxy."""
    if not 0 <= beta <= 1:
        raise NormParameterError(f"beta must lie in [0, 1] (got {beta})")
    base = lq_norm(f, q)
    top = h2q_norm(f, q)
    return float(base ** (1.0 - beta) * top**beta)


def _as_array(v_path) -> np.ndarray:
    if isinstance(v_path, (list, tuple)) and v_path and isinstance(v_path[0], Field3D):
        return np.stack([f.values() for f in v_path])
    return np.asarray(v_path, dtype=float)


def maxreg_norm(v_path, times, p: float, q: float, mu: float, hgrid: HorizontalGrid, vgrid) -> float:
    """||d_t v||_{L^p_mu(L^q)} + ||v||_{L^p_mu(H^{2,q})} for a sampled path."""
    check_params(p, mu, q)
    vals = _as_array(v_path)
    t = np.asarray(times, dtype=float)
    if vals.shape[0] < 3:
        raise ValueError("maxreg_norm needs at least 3 time samples")
    dvdt = np.gradient(vals, t, axis=0, edge_order=2)
    dt_norms = [lq_norm(Field3D(hgrid, vgrid, d), q) for d in dvdt]
    h2 = [h2q_norm(Field3D(hgrid, vgrid, v), q) for v in vals]
    return weighted_lp_norm(dt_norms, t, p, mu) + weighted_lp_norm(h2, t, p, mu)
