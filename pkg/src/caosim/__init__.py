"""Coupled atmosphere-ocean primitive equations with nonlinear interface drag."""

from .domain import Boundary, Field3D, GridError, HorizontalGrid, Kind, State, SurfaceField, VerticalGrid

__all__ = ["Boundary", "Field3D", "GridError", "HorizontalGrid", "Kind", "State", "SurfaceField", "VerticalGrid"]
__version__ = "0.1.0"
