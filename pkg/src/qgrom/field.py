"""Cell-averaged scalar fields and the discrete L2 inner product.

The volume-weighted inner product defined here is the single pairing used
by the POD, the Galerkin projection, and all error norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh


@dataclass
class Field:
    """A scalar value per cell of a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_cells,):
            raise ValueError(
                f"field has {self.values.shape} values for a mesh with "
                f"{self.mesh.n_cells} cells")

    def copy(self) -> "Field":
        return Field(self.mesh, self.values.copy())

    def check_finite(self) -> "Field":
        if not np.isfinite(self.values).all():
            raise FloatingPointError("field contains non-finite values")
        return self


def _require_same_mesh(a: Field, b: Field) -> None:
    if not a.mesh.same_geometry(b.mesh):
        raise ValueError("fields live on different meshes")


def inner_product(a: Field, b: Field) -> float:
    """Discrete L2 pairing: sum_i a_i * b_i * |cell_i|."""
    _require_same_mesh(a, b)
    return float(np.dot(a.values * a.mesh.cell_volumes, b.values))


def norm(a: Field) -> float:
    """Discrete L2 norm induced by :func:`inner_product`."""
    return float(np.sqrt(np.dot(a.values * a.mesh.cell_volumes, a.values)))


def coordinate_field_y(mesh: Mesh) -> Field:
    """Field whose value in each cell is the centroid y-coordinate."""
    return Field(mesh, mesh.cell_centroids[:, 1].copy())


def forcing_field(mesh: Mesh) -> Field:
    """Double-gyre wind forcing sin(pi*y) evaluated at cell centroids."""
    return Field(mesh, np.sin(np.pi * mesh.cell_centroids[:, 1]))
