"""Scalar and field diagnostics: kinetic energy, time averages, relative
errors, gyre-pattern detection, Munk scale, standard vorticity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field, norm
from .mesh import Mesh


@dataclass
class EnergyTrace:
    """Kinetic energy samples (time, E), strictly increasing in time."""

    entries: list[tuple[float, float]]

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.entries])

    def values(self) -> np.ndarray:
        return np.array([e for _, e in self.entries])


def green_gauss_gradient(mesh: Mesh, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centered gradient with arithmetic face interpolation and zero
    wall values, consistent with the FV discretization."""
    nx, ny, hx, hy = mesh.nx, mesh.ny, mesh.hx, mesh.hy
    v = values.reshape(ny, nx)
    fx = np.zeros((ny, nx + 1))
    fx[:, 1:-1] = 0.5 * (v[:, :-1] + v[:, 1:])
    fy = np.zeros((ny + 1, nx))
    fy[1:-1, :] = 0.5 * (v[:-1, :] + v[1:, :])
    gx = (fx[:, 1:] - fx[:, :-1]) / hx
    gy = (fy[1:, :] - fy[:-1, :]) / hy
    return gx.ravel(), gy.ravel()


def kinetic_energy(psi: Field, mesh: Mesh) -> float:
    """E = 1/2 * sum_i |grad psi|_i^2 * |cell_i| with psi = 0 walls."""
    if not psi.mesh.same_geometry(mesh):
        raise ValueError("psi lives on a different mesh")
    gx, gy = green_gauss_gradient(mesh, psi.values)
    return float(0.5 * np.dot(gx * gx + gy * gy, mesh.cell_volumes))


def time_average(fields: list[Field]) -> Field:
    """Arithmetic mean over uniformly sampled instants."""
    if not fields:
        raise ValueError("cannot average an empty field list")
    mesh = fields[0].mesh
    acc = np.zeros(mesh.n_cells)
    for f in fields:
        if not f.mesh.same_geometry(mesh):
            raise ValueError("fields live on different meshes")
        acc += f.values
    return Field(mesh, acc / len(fields))


def relative_error(psi_mean_fom: Field, psi_mean_rom: Field) -> float:
    """Relative discrete-L2 error between two time-averaged fields."""
    ref = norm(psi_mean_fom)
    if ref == 0.0:
        raise ValueError("reference field has zero norm")
    diff = Field(psi_mean_fom.mesh, psi_mean_fom.values - psi_mean_rom.values)
    return norm(diff) / ref


def gyre_count(psi_mean: Field, mesh: Mesh) -> int:
    """Count sign-alternating bands of the time-averaged stream function
    along the vertical probe line of cells nearest x = 0.5.

    A band is a maximal constant-sign run whose peak magnitude exceeds 5%
    of max |psi_mean| (noise floor).
    """
    if not psi_mean.mesh.same_geometry(mesh):
        raise ValueError("field lives on a different mesh")
    vmax = np.abs(psi_mean.values).max()
    if vmax == 0.0:
        return 0
    floor = 0.05 * vmax
    xc = mesh.cell_centroids[: mesh.nx, 0]
    col = int(np.argmin(np.abs(xc - 0.5)))
    profile = psi_mean.values.reshape(mesh.ny, mesh.nx)[:, col]
    count = 0
    run_sign = 0
    run_peak = 0.0
    for v in profile:
        s = 0 if v == 0.0 else (1 if v > 0 else -1)
        if s != run_sign:
            if run_sign != 0 and run_peak > floor:
                count += 1
            run_sign = s
            run_peak = 0.0
        run_peak = max(run_peak, abs(v))
    if run_sign != 0 and run_peak > floor:
        count += 1
    return count


def munk_scale(ro: float, re: float, length: float) -> float:
    """Western boundary-layer width L * (Ro/Re)^(1/3)."""
    if ro <= 0 or re <= 0 or length <= 0:
        raise ValueError("Munk scale arguments must be positive")
    return float(length * np.cbrt(ro / re))


def standard_vorticity(q: Field, ro: float, mesh: Mesh) -> Field:
    """Recover omega = (q - y) / Ro from the potential vorticity."""
    if ro == 0:
        raise ValueError("Ro must be nonzero")
    if not q.mesh.same_geometry(mesh):
        raise ValueError("q lives on a different mesh")
    y = mesh.cell_centroids[:, 1]
    return Field(mesh, (q.values - y) / ro)
