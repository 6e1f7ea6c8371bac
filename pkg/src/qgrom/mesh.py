"""Structured orthogonal finite-volume mesh on a rectangular domain.

Cells are uniform rectangles ordered row-major with x fastest. Faces are
stored x-normal first (column by column of vertical faces, bottom row to
top row), then y-normal. Each face carries an area vector oriented outward
from its owner cell; the owner is always the lower-index adjacent cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_TAGS = ("left", "right", "bottom", "top")
INTERIOR = ""


@dataclass(frozen=True)
class Mesh:
    """Immutable geometry of a uniform Cartesian FV grid.

    Attributes
    ----------
    nx, ny : int
        Cell counts in x and y.
    x_min, x_max, y_min, y_max : float
        Domain bounds.
    cell_volumes : (n_cells,) ndarray
        Cell areas (unit depth implied).
    cell_centroids : (n_cells, 2) ndarray
        Cell centroid coordinates, row-major with x fastest.
    face_owner, face_neighbor : (n_faces,) ndarray
        Adjacent cell indices; neighbor is -1 on boundary faces.
    face_area_vectors : (n_faces, 2) ndarray
        Face area vectors, outward from the owner cell.
    face_centroids : (n_faces, 2) ndarray
    face_tags : (n_faces,) ndarray of str
        One of BOUNDARY_TAGS for boundary faces, "" for interior faces.
    cell_faces : (n_cells, 4) ndarray
        Face ids per cell in (west, east, south, north) order.
    cell_face_signs : (n_cells, 4) ndarray
        +1 where the stored area vector already points out of the cell,
        -1 where it must be flipped.
    """

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    cell_volumes: np.ndarray
    cell_centroids: np.ndarray
    face_owner: np.ndarray
    face_neighbor: np.ndarray
    face_area_vectors: np.ndarray
    face_centroids: np.ndarray
    face_tags: np.ndarray
    cell_faces: np.ndarray
    cell_face_signs: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_faces(self) -> int:
        return self.face_owner.shape[0]

    @property
    def n_xfaces(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def key(self) -> tuple:
        """Geometry signature used for cheap same-mesh checks."""
        return (self.nx, self.ny, self.x_min, self.x_max, self.y_min, self.y_max)

    def same_geometry(self, other: "Mesh") -> bool:
        return self is other or self.key == other.key


def build_mesh(nx: int, ny: int, bounds: tuple[float, float, float, float]) -> Mesh:
    """Build the uniform FV mesh of the rectangle given by ``bounds``.

    Parameters
    ----------
    nx, ny : int
        Number of cells in each direction, at least 2.
    bounds : (x_min, x_max, y_min, y_max)

    Returns
    -------
    Mesh
        Cells ordered row-major (x fastest); every cell has exactly 4 faces.
    """
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise ValueError(f"cell counts must be >= 2, got nx={nx}, ny={ny}")
    x_min, x_max, y_min, y_max = (float(v) for v in bounds)
    if not (np.isfinite([x_min, x_max, y_min, y_max]).all()):
        raise ValueError(f"bounds must be finite, got {bounds}")
    if x_max <= x_min or y_max <= y_min:
        raise ValueError(f"degenerate bounds {bounds}")

    hx = (x_max - x_min) / nx
    hy = (y_max - y_min) / ny
    n_cells = nx * ny

    xc = x_min + (np.arange(nx) + 0.5) * hx
    yc = y_min + (np.arange(ny) + 0.5) * hy
    gx, gy = np.meshgrid(xc, yc)  # row-major, x fastest
    cell_centroids = np.column_stack([gx.ravel(), gy.ravel()])
    cell_volumes = np.full(n_cells, hx * hy)

    # x-normal (vertical) faces: id = j*(nx+1) + iv, iv in 0..nx, j in 0..ny-1
    iv, jx = np.meshgrid(np.arange(nx + 1), np.arange(ny))
    iv, jx = iv.ravel(), jx.ravel()
    x_owner = np.where(iv == 0, jx * nx, jx * nx + iv - 1)
    x_neigh = np.where((iv == 0) | (iv == nx), -1, jx * nx + iv)
    x_avec = np.column_stack([np.where(iv == 0, -hy, hy), np.zeros(iv.size)])
    x_cent = np.column_stack([x_min + iv * hx, y_min + (jx + 0.5) * hy])
    x_tags = np.where(iv == 0, "left", np.where(iv == nx, "right", INTERIOR))

    # y-normal (horizontal) faces: id = n_xfaces + jv*nx + i, jv in 0..ny
    i, jv = np.meshgrid(np.arange(nx), np.arange(ny + 1))
    i, jv = i.ravel(), jv.ravel()
    y_owner = np.where(jv == 0, i, (jv - 1) * nx + i)
    y_neigh = np.where((jv == 0) | (jv == ny), -1, jv * nx + i)
    y_avec = np.column_stack([np.zeros(i.size), np.where(jv == 0, -hx, hx)])
    y_cent = np.column_stack([x_min + (i + 0.5) * hx, y_min + jv * hy])
    y_tags = np.where(jv == 0, "bottom", np.where(jv == ny, "top", INTERIOR))

    face_owner = np.concatenate([x_owner, y_owner]).astype(np.int64)
    face_neighbor = np.concatenate([x_neigh, y_neigh]).astype(np.int64)
    face_area_vectors = np.vstack([x_avec, y_avec])
    face_centroids = np.vstack([x_cent, y_cent])
    face_tags = np.concatenate([x_tags, y_tags])

    # per-cell face ids (west, east, south, north) and outward signs
    n_xf = (nx + 1) * ny
    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny))
    ci, cj = ci.ravel(), cj.ravel()
    west = cj * (nx + 1) + ci
    east = cj * (nx + 1) + ci + 1
    south = n_xf + cj * nx + ci
    north = n_xf + (cj + 1) * nx + ci
    cell_faces = np.column_stack([west, east, south, north]).astype(np.int64)
    sign_w = np.where(ci == 0, 1.0, -1.0)
    sign_s = np.where(cj == 0, 1.0, -1.0)
    ones = np.ones(n_cells)
    cell_face_signs = np.column_stack([sign_w, ones, sign_s, ones])

    for arr in (cell_volumes, cell_centroids, face_owner, face_neighbor,
                face_area_vectors, face_centroids, face_tags, cell_faces,
                cell_face_signs):
        arr.setflags(write=False)

    return Mesh(nx=nx, ny=ny, x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max,
                cell_volumes=cell_volumes, cell_centroids=cell_centroids,
                face_owner=face_owner, face_neighbor=face_neighbor,
                face_area_vectors=face_area_vectors, face_centroids=face_centroids,
                face_tags=face_tags, cell_faces=cell_faces,
                cell_face_signs=cell_face_signs)


def boundary_faces(mesh: Mesh) -> list[tuple[int, str]]:
    """Return (face id, side tag) for every boundary face, each exactly once."""
    ids = np.flatnonzero(mesh.face_neighbor < 0)
    return [(int(f), str(mesh.face_tags[f])) for f in ids]
