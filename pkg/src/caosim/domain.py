"""Discrete geometry and field containers.

The horizontal domain is the torus [0, 2pi)^2 sampled on a uniform
``nx x ny`` grid. Each subdomain has a uniform vertical grid: the ocean
column z in [-1, 0] and the atmosphere column p in [p_s e^{-1}, p_s].

Fields carry a component axis even when scalar, so a 3D field has data
shape ``(ncomp, nz, nx, ny)`` and a surface field ``(ncomp, nx, ny)``.
Spectral coefficients are normalised so that the (0, 0) coefficient is
the horizontal mean.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from fractions import Fraction
from functools import cached_property

import numpy as np


class Kind(enum.Enum):
    ATMOSPHERE = "atmosphere"
    OCEAN = "ocean"


class Boundary(enum.Enum):
    TOP = "top"  # the air-sea interface for both subdomains
    BOTTOM = "bottom"


class GridError(ValueError):
    """Raised when a grid or field violates its construction invariants."""


@dataclasses.dataclass(frozen=True)
class HorizontalGrid:
    nx: int
    ny: int
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 4 or n % 2:
                raise GridError(f"{name} must be even, >= 4 (got {n!r})")
        frac = Fraction(self.dealias_fraction)
        if not 0 < frac <= 1:
            raise GridError(f"dealias_fraction must lie in (0, 1] (got {frac})")
        object.__setattr__(self, "dealias_fraction", frac)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return 4.0 * math.pi**2 / (self.nx * self.ny)

    @cached_property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nx) / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.ny) / self.ny

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @staticmethod
    def _wavenumbers(n: int) -> np.ndarray:
        # FFT ordering; the Nyquist entry is +n/2 so the set is {-n/2+1, ..., n/2}
        k = np.fft.fftfreq(n, d=1.0 / n)
        k[n // 2] = n // 2
        return k

    @cached_property
    def kx(self) -> np.ndarray:
        return self._wavenumbers(self.nx)[:, None] * np.ones((1, self.ny))

    @cached_property
    def ky(self) -> np.ndarray:
        return np.ones((self.nx, 1)) * self._wavenumbers(self.ny)[None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        frac = self.dealias_fraction
        kx = np.abs(self._wavenumbers(self.nx)).astype(int)
        ky = np.abs(self._wavenumbers(self.ny)).astype(int)
        keep_x = np.array([Fraction(int(k)) <= frac * self.nx / 2 for k in kx])
        keep_y = np.array([Fraction(int(k)) <= frac * self.ny / 2 for k in ky])
        return keep_x[:, None] & keep_y[None, :]


@dataclasses.dataclass(frozen=True)
class VerticalGrid:
    """Uniform vertical nodes for one subdomain; index 0 is the bottom boundary."""

    kind: Kind
    nz: int
    p_s: float = 1.0

    def __post_init__(self):
        if not isinstance(self.nz, (int, np.integer)) or self.nz < 3:
            raise GridError(f"nz must be an integer >= 3 (got {self.nz!r})")
        if self.kind is Kind.ATMOSPHERE and not self.p_s > 0:
            raise GridError(f"p_s must be positive (got {self.p_s!r})")

    @classmethod
    def ocean(cls, nz: int) -> "VerticalGrid":
        return cls(Kind.OCEAN, nz)

    @classmethod
    def atmosphere(cls, nz: int, p_s: float = 1.0) -> "VerticalGrid":
        return cls(Kind.ATMOSPHERE, nz, p_s)

    @property
    def bottom(self) -> float:
        return self.p_s * math.exp(-1.0) if self.kind is Kind.ATMOSPHERE else -1.0

    @property
    def top(self) -> float:
        return self.p_s if self.kind is Kind.ATMOSPHERE else 0.0

    @property
    def p_a(self) -> float:
        if self.kind is not Kind.ATMOSPHERE:
            raise GridError("p_a is only defined for the atmosphere grid")
        return self.bottom

    @property
    def length(self) -> float:
        return self.top - self.bottom

    @property
    def h(self) -> float:
        return self.length / (self.nz - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(self.bottom, self.top, self.nz)
        nodes[0], nodes[-1] = self.bottom, self.top
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; they sum to the column length."""
        w = np.full(self.nz, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def diffusivity(self, xi: np.ndarray) -> np.ndarray:
        """Vertical diffusion coefficient: 1 in the ocean, p^2 in the atmosphere."""
        xi = np.asarray(xi, dtype=float)
        return xi**2 if self.kind is Kind.ATMOSPHERE else np.ones_like(xi)

    @cached_property
    def half_nodes(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def half_diffusivity(self) -> np.ndarray:
        return self.diffusivity(self.half_nodes)


@dataclasses.dataclass(frozen=True, eq=False)
class SurfaceField:
    """Scalar or 2-vector field on the horizontal torus."""

    hgrid: HorizontalGrid
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[1:] != self.hgrid.shape or data.shape[0] not in (1, 2):
            raise GridError(f"surface data shape {data.shape} does not match grid {self.hgrid.shape}")
        data = data.astype(complex if self.spectral else float, copy=False)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    def with_data(self, data: np.ndarray, spectral: bool | None = None) -> "SurfaceField":
        return SurfaceField(self.hgrid, data, self.spectral if spectral is None else spectral)

    def to_spectral(self) -> "SurfaceField":
        return to_spectral(self)

    def to_physical(self) -> "SurfaceField":
        return to_physical(self)

    def values(self) -> np.ndarray:
        return to_physical(self).data

    def coeffs(self) -> np.ndarray:
        return to_spectral(self).data

    def _binary(self, other, op):
        if isinstance(other, SurfaceField):
            a, b = (self.coeffs(), other.coeffs()) if self.spectral else (self.data, other.values())
            return self.with_data(op(a, b))
        return self.with_data(op(self.data, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)

    @classmethod
    def zeros(cls, hgrid: HorizontalGrid, ncomp: int = 1, spectral: bool = True) -> "SurfaceField":
        return cls(hgrid, np.zeros((ncomp,) + hgrid.shape), spectral)

    @classmethod
    def from_function(cls, hgrid: HorizontalGrid, fn) -> "SurfaceField":
        """Sample ``fn(x, y)``; a tuple/list result gives a vector field."""
        X, Y = hgrid.mesh
        vals = fn(X, Y)
        if isinstance(vals, (tuple, list)):
            vals = np.stack([np.broadcast_to(v, X.shape) for v in vals])
        else:
            vals = np.broadcast_to(vals, X.shape)[None]
        return cls(hgrid, np.array(vals, dtype=float), spectral=False)


@dataclasses.dataclass(frozen=True, eq=False)
class Field3D:
    """Scalar or 2-vector field on one subdomain."""

    hgrid: HorizontalGrid
    vgrid: VerticalGrid
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 3:
            data = data[None]
        expected = (self.vgrid.nz,) + self.hgrid.shape
        if data.ndim != 4 or data.shape[1:] != expected or data.shape[0] not in (1, 2):
            raise GridError(f"field data shape {data.shape} does not match grid {expected}")
        data = data.astype(complex if self.spectral else float, copy=False)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    def with_data(self, data: np.ndarray, spectral: bool | None = None) -> "Field3D":
        return Field3D(self.hgrid, self.vgrid, data, self.spectral if spectral is None else spectral)

    def to_spectral(self) -> "Field3D":
        return to_spectral(self)

    def to_physical(self) -> "Field3D":
        return to_physical(self)

    def values(self) -> np.ndarray:
        return to_physical(self).data

    def coeffs(self) -> np.ndarray:
        return to_spectral(self).data

    def _binary(self, other, op):
        if isinstance(other, Field3D):
            a, b = (self.coeffs(), other.coeffs()) if self.spectral else (self.data, other.values())
            return self.with_data(op(a, b))
        return self.with_data(op(self.data, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)

    @classmethod
    def zeros(cls, hgrid, vgrid, ncomp: int = 2, spectral: bool = True) -> "Field3D":
        return cls(hgrid, vgrid, np.zeros((ncomp, vgrid.nz) + hgrid.shape), spectral)

    @classmethod
    def from_function(cls, hgrid: HorizontalGrid, vgrid: VerticalGrid, fn) -> "Field3D":
        """Sample ``fn(x, y, xi)`` where xi is z (ocean) or p (atmosphere)."""
        X, Y = hgrid.mesh
        Z = vgrid.nodes[:, None, None]
        shape = (vgrid.nz,) + hgrid.shape
        vals = fn(X[None], Y[None], Z)
        if isinstance(vals, (tuple, list)):
            vals = np.stack([np.broadcast_to(v, shape) for v in vals])
        else:
            vals = np.broadcast_to(vals, shape)[None]
        return cls(hgrid, vgrid, np.array(vals, dtype=float), spectral=False)


@dataclasses.dataclass(frozen=True, eq=False)
class State:
    """Prognostic state: horizontal velocities of both subdomains and time."""

    va: Field3D
    vo: Field3D
    t: float = 0.0

    def __post_init__(self):
        if self.va.vgrid.kind is not Kind.ATMOSPHERE or self.vo.vgrid.kind is not Kind.OCEAN:
            raise GridError("State expects (atmosphere, ocean) fields in that order")
        if self.va.hgrid != self.vo.hgrid:
            raise GridError("atmosphere and ocean fields must share the horizontal grid")
        if self.va.ncomp != 2 or self.vo.ncomp != 2:
            raise GridError("state velocities must have two components")

    @property
    def hgrid(self) -> HorizontalGrid:
        return self.va.hgrid

    def spectral(self) -> "State":
        return State(to_spectral(self.va), to_spectral(self.vo), self.t)

    def constraint_residual(self) -> float:
        """max |div_H of the vertical average| over both subdomains."""
        from .calculus import div_h, vertical_average

        return max(
            float(np.max(np.abs(div_h(vertical_average(f)).values()))) for f in (self.va, self.vo)
        )


def _fft(data: np.ndarray) -> np.ndarray:
    n = data.shape[-1] * data.shape[-2]
    return np.fft.fft2(data, axes=(-2, -1)) / n


def _ifft(data: np.ndarray) -> np.ndarray:
    n = data.shape[-1] * data.shape[-2]
    return np.fft.ifft2(data * n, axes=(-2, -1)).real


def to_spectral(f):
    if f.spectral:
        return f
    return f.with_data(_fft(f.data), spectral=True)


def to_physical(f):
    if not f.spectral:
        return f
    return f.with_data(_ifft(f.data), spectral=False)


def trace(f: Field3D, boundary: Boundary) -> SurfaceField:
    """Level slice at a boundary; TOP is the interface node for both subdomains."""
    idx = -1 if boundary is Boundary.TOP else 0
    return SurfaceField(f.hgrid, f.data[:, idx], f.spectral)


def dealias(f):
    """Zero the modes outside the retained (2/3-rule) band."""
    g = to_spectral(f)
    return g.with_data(g.data * g.hgrid.dealias_mask)


def broadcast_levels(surface: np.ndarray, nz: int) -> np.ndarray:
    """(ncomp, nx, ny) -> (ncomp, nz, nx, ny) by repetition over levels."""
    return np.broadcast_to(surface[:, None], (surface.shape[0], nz) + surface.shape[1:])
