"""Full-order model: segregated BDF1 finite-volume stepping of the
quasi-geostrophic equations in potential-vorticity / stream-function form.

Each step solves the implicit transport equation

    q/dt + div(u q) - (1/Re) lap q = F + q_prev/dt,   u = curl(psi_prev)

for the new potential vorticity with BiCGStab, then the elliptic balance

    -Ro lap psi = q - y,   psi = 0 on the boundary

with conjugate gradients. The advecting face flux is built from vertex
stream-function values, which makes it divergence free at the discrete
level and exactly zero through boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field, coordinate_field_y, forcing_field
from .linsolve import ConvergenceError, SparseMatrix, solve_general, solve_spd
from .mesh import Mesh, build_mesh

CONVECTION_SCHEMES = ("linear", "upwind")
FORCING_CHOICES = ("double_gyre", "none")


@dataclass
class FomConfig:
    """Physical and numerical parameters of a full-order run."""

    ro: float
    re: float
    dt: float
    t0: float
    t_end: float
    nx: int
    ny: int
    bounds: tuple[float, float, float, float] = (0.0, 1.0, -1.0, 1.0)
    snapshot_stride: int = 1
    tol_spd: float = 1e-8
    tol_gen: float = 1e-8
    max_iter: int = 20000
    convection: str = "linear"
    forcing: str = "double_gyre"

    def __post_init__(self):
        if self.ro <= 0 or self.re <= 0:
            raise ValueError("Ro and Re must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end <= self.t0:
            raise ValueError("t_end must exceed t0")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.convection not in CONVECTION_SCHEMES:
            raise ValueError(f"unknown convection scheme {self.convection!r}")
        if self.forcing not in FORCING_CHOICES:
            raise ValueError(f"unknown forcing {self.forcing!r}")

    def make_mesh(self) -> Mesh:
        return build_mesh(self.nx, self.ny, self.bounds)

    def n_steps(self) -> int:
        n = int(round((self.t_end - self.t0) / self.dt))
        if n < 1:
            raise ValueError("time window shorter than one step")
        return n

    def forcing_values(self, mesh: Mesh) -> np.ndarray:
        if self.forcing == "none":
            return np.zeros(mesh.n_cells)
        return forcing_field(mesh).values


@dataclass
class FomState:
    q: Field
    psi: Field
    time: float


@dataclass
class FaceFlux:
    """Volumetric flux through each face, oriented along the stored
    (owner-outward) face area vectors."""

    mesh: Mesh
    values: np.ndarray


def _vertex_stream(mesh: Mesh, psi_values: np.ndarray) -> np.ndarray:
    """Stream function at mesh vertices; boundary vertices carry psi = 0."""
    v2 = psi_values.reshape(mesh.ny, mesh.nx)
    vert = np.zeros((mesh.ny + 1, mesh.nx + 1))
    vert[1:-1, 1:-1] = 0.25 * (v2[:-1, :-1] + v2[:-1, 1:] + v2[1:, :-1] + v2[1:, 1:])
    return vert


def _curl_flux_values(mesh: Mesh, psi_values: np.ndarray) -> np.ndarray:
    """Face fluxes of u = curl(psi) from vertex stream-function differences.

    The flux through a face equals the difference of the vertex stream
    function at its endpoints, so the per-cell flux balance telescopes to
    zero identically and boundary faces (both endpoints on the wall where
    psi = 0) carry no flux.
    """
    vert = _vertex_stream(mesh, psi_values)
    fx = vert[1:, :] - vert[:-1, :]        # (ny, nx+1): +x oriented
    fy = vert[:, :-1] - vert[:, 1:]        # (ny+1, nx): +y oriented
    fx[:, 0] *= -1.0                        # align with stored outward vectors
    fy[0, :] *= -1.0                        # (zero anyway: wall vertices)
    return np.concatenate([fx.ravel(), fy.ravel()])


def curl_flux(psi: Field, mesh: Mesh) -> FaceFlux:
    """Face-normal volumetric flux of the velocity induced by ``psi``."""
    if not psi.mesh.same_geometry(mesh):
        raise ValueError("psi lives on a different mesh")
    return FaceFlux(mesh, _curl_flux_values(mesh, psi.values))


def flux_divergence(mesh: Mesh, flux: FaceFlux) -> np.ndarray:
    """Signed outward flux sum per cell (diagnostic; zero for curl fluxes)."""
    return (flux.values[mesh.cell_faces] * mesh.cell_face_signs).sum(axis=1)


# --- discrete operators shared with the reduced-order assembly -------------

def apply_laplacian(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """FV Laplacian with homogeneous Dirichlet data, divided by cell volume.

    Two-point orthogonal face gradients; boundary faces see a zero value at
    the face centroid, half a cell away.
    """
    nx, ny, hx, hy = mesh.nx, mesh.ny, mesh.hx, mesh.hy
    v = values.reshape(ny, nx)
    p = np.empty((ny + 2, nx + 2))
    p[1:-1, 1:-1] = v
    # ghost = -edge makes the two-point gradient match a zero wall value
    p[0, 1:-1] = -v[0, :]
    p[-1, 1:-1] = -v[-1, :]
    p[1:-1, 0] = -v[:, 0]
    p[1:-1, -1] = -v[:, -1]
    out = (p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]) / hx**2 \
        + (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / hy**2
    return out.ravel()


def laplacian_boundary_term(mesh: Mesh, boundary_values: np.ndarray) -> np.ndarray:
    """Per-cell contribution of nonzero Dirichlet data to the FV Laplacian.

    ``boundary_values`` holds one value per face (entries at interior faces
    are ignored). Adding this vector to :func:`apply_laplacian` gives the
    Laplacian with the given wall data.
    """
    bnd = np.flatnonzero(mesh.face_neighbor < 0)
    owner = mesh.face_owner[bnd]
    areas = np.abs(mesh.face_area_vectors[bnd]).sum(axis=1)
    # x-normal faces have area hy and spacing hx, y-normal the reverse
    is_x = np.abs(mesh.face_area_vectors[bnd, 0]) > 0
    delta = np.where(is_x, mesh.hx, mesh.hy)
    coef = 2.0 * areas / delta / mesh.cell_volumes[owner]
    out = np.zeros(mesh.n_cells)
    np.add.at(out, owner, coef * boundary_values[bnd])
    return out


def dirichlet_y_boundary_values(mesh: Mesh) -> np.ndarray:
    """Per-face Dirichlet data q = y evaluated at boundary face centroids."""
    return mesh.face_centroids[:, 1].copy()


def apply_convection(mesh: Mesh, flux_values: np.ndarray, values: np.ndarray,
                     scheme: str = "linear") -> np.ndarray:
    """FV divergence of (flux * face value), divided by cell volume.

    Face values by arithmetic mean (``linear``) or donor-cell upwinding
    (``upwind``). Boundary faces are assumed flux-free, which holds for any
    flux produced by :func:`curl_flux`.
    """
    interior = mesh.face_neighbor >= 0
    io = mesh.face_owner[interior]
    ine = mesh.face_neighbor[interior]
    phi = flux_values[interior]
    if scheme == "linear":
        fv = 0.5 * (values[io] + values[ine])
    elif scheme == "upwind":
        fv = np.where(phi >= 0.0, values[io], values[ine])
    else:
        raise ValueError(f"unknown convection scheme {scheme!r}")
    n = mesh.n_cells
    contrib = phi * fv
    out = np.bincount(io, weights=contrib, minlength=n) \
        - np.bincount(ine, weights=contrib, minlength=n)
    return out / mesh.cell_volumes


# --- matrix assembly --------------------------------------------------------

class TransportAssembler:
    """Reusable assembler for the implicit transport system.

    The sparsity pattern (5-point stencil) is fixed by the mesh, so it is
    built once and only the value array is refilled per call.
    """

    def __init__(self, mesh: Mesh, re: float, dt: float, convection: str):
        if convection not in CONVECTION_SCHEMES:
            raise ValueError(f"unknown convection scheme {convection!r}")
        self.mesh = mesh
        self.re = re
        self.dt = dt
        self.convection = convection
        n = mesh.n_cells

        interior = mesh.face_neighbor >= 0
        self.int_ids = np.flatnonzero(interior)
        self.io = mesh.face_owner[self.int_ids]
        self.ine = mesh.face_neighbor[self.int_ids]
        avec = mesh.face_area_vectors
        areas = np.abs(avec).sum(axis=1)
        is_x = np.abs(avec[:, 0]) > 0
        delta = np.where(is_x, mesh.hx, mesh.hy)
        vol = mesh.cell_volumes
        g_all = areas / delta / vol[mesh.face_owner]     # (A/delta)/V per face
        self.g_int = g_all[self.int_ids]
        self.inv_vol_int = 1.0 / vol[self.io]

        bnd = np.flatnonzero(~interior)
        self.bnd_ids = bnd
        self.ob = mesh.face_owner[bnd]
        gb = 2.0 * g_all[bnd]
        qb = dirichlet_y_boundary_values(mesh)[bnd]
        self.rhs_bnd = np.zeros(n)
        np.add.at(self.rhs_bnd, self.ob, gb * qb / re)
        self.qb = qb
        self.inv_vol_bnd = 1.0 / vol[self.ob]

        diff_diag = np.zeros(n)
        np.add.at(diff_diag, self.io, self.g_int)
        np.add.at(diff_diag, self.ine, self.g_int)
        np.add.at(diff_diag, self.ob, gb)
        self.diag_base = 1.0 / dt + diff_diag / re

        # fixed CSR pattern: diagonal plus one entry per interior-face side
        rows = np.concatenate([np.arange(n), self.io, self.ine])
        cols = np.concatenate([np.arange(n), self.ine, self.io])
        pattern = SparseMatrix.from_coo(n, rows, cols, np.ones(rows.size))
        self.indptr = pattern.indptr.copy()
        self.indices = pattern.indices.copy()
        key = np.repeat(np.arange(n, dtype=np.int64),
                        np.diff(self.indptr)) * n + self.indices
        self.pos_diag = np.searchsorted(key, np.arange(n, dtype=np.int64) * n
                                        + np.arange(n))
        self.pos_o2n = np.searchsorted(key, self.io.astype(np.int64) * n + self.ine)
        self.pos_n2o = np.searchsorted(key, self.ine.astype(np.int64) * n + self.io)
        self.nnz = self.indices.size

    def assemble(self, q_prev: np.ndarray, flux_values: np.ndarray,
                 f_values: np.ndarray) -> tuple[SparseMatrix, np.ndarray]:
        n = self.mesh.n_cells
        phi = flux_values[self.int_ids] * self.inv_vol_int
        if self.convection == "linear":
            half = 0.5 * phi
            off_o2n = half
            off_n2o = -half
            conv_diag = np.bincount(self.io, weights=half, minlength=n) \
                - np.bincount(self.ine, weights=half, minlength=n)
        else:
            up = np.maximum(phi, 0.0)
            dn = np.minimum(phi, 0.0)
            off_o2n = dn
            off_n2o = -up
            conv_diag = np.bincount(self.io, weights=up, minlength=n) \
                - np.bincount(self.ine, weights=dn, minlength=n)

        gd = self.g_int / self.re
        data = np.zeros(self.nnz)
        data[self.pos_o2n] = off_o2n - gd
        data[self.pos_n2o] = off_n2o - gd
        data[self.pos_diag] = self.diag_base + conv_diag

        rhs = f_values + q_prev / self.dt + self.rhs_bnd
        phi_b = flux_values[self.bnd_ids]
        if np.any(phi_b != 0.0):
            # Dirichlet face value rides any nonzero boundary flux
            np.subtract.at(rhs, self.ob, phi_b * self.qb * self.inv_vol_bnd)

        mat = SparseMatrix(n, self.indptr, self.indices, data, _skip_checks=True)
        return mat, rhs


def assemble_transport(q_prev: Field, flux: FaceFlux, cfg: FomConfig,
                       f: Field) -> tuple[SparseMatrix, np.ndarray]:
    """Matrix and right-hand side of the implicit transport step.

    Rows are scaled by cell volume so the mass contribution sits on the
    diagonal as exactly 1/dt; the Dirichlet value q = y enters the rhs.
    """
    mesh = q_prev.mesh
    if not (flux.mesh.same_geometry(mesh) and f.mesh.same_geometry(mesh)):
        raise ValueError("inputs live on different meshes")
    asm = TransportAssembler(mesh, cfg.re, cfg.dt, cfg.convection)
    return asm.assemble(q_prev.values, flux.values, f.values)


def build_stream_matrix(mesh: Mesh, ro: float) -> SparseMatrix:
    """SPD matrix of -Ro * lap with psi = 0 walls, rows scaled by volume."""
    n = mesh.n_cells
    interior = mesh.face_neighbor >= 0
    io = mesh.face_owner[interior]
    ine = mesh.face_neighbor[interior]
    avec = mesh.face_area_vectors
    areas = np.abs(avec).sum(axis=1)
    is_x = np.abs(avec[:, 0]) > 0
    delta = np.where(is_x, mesh.hx, mesh.hy)
    g_all = areas / delta / mesh.cell_volumes[mesh.face_owner]
    g_int = g_all[interior]
    diag = np.zeros(n)
    np.add.at(diag, io, g_int)
    np.add.at(diag, ine, g_int)
    bnd = ~interior
    np.add.at(diag, mesh.face_owner[bnd], 2.0 * g_all[bnd])
    rows = np.concatenate([np.arange(n), io, ine])
    cols = np.concatenate([np.arange(n), ine, io])
    vals = np.concatenate([ro * diag, -ro * g_int, -ro * g_int])
    return SparseMatrix.from_coo(n, rows, cols, vals)


# --- time stepping ----------------------------------------------------------

class _FomDriver:
    """Holds per-run precomputed operators and warm-start history."""

    def __init__(self, cfg: FomConfig, mesh: Mesh):
        if (mesh.nx, mesh.ny) != (cfg.nx, cfg.ny) or mesh.bounds != tuple(
                float(v) for v in cfg.bounds):
            raise ValueError("mesh does not match the configuration")
        self.cfg = cfg
        self.mesh = mesh
        self.y = coordinate_field_y(mesh).values
        self.f_values = cfg.forcing_values(mesh)
        self.assembler = TransportAssembler(mesh, cfg.re, cfg.dt, cfg.convection)
        self.stream_matrix = build_stream_matrix(mesh, cfg.ro)
        self.psi_prev: np.ndarray | None = None
        self.psi_prev2: np.ndarray | None = None

    def _solve_correction(self, solver, mat, rhs, guess, tol, label, step_index):
        """Solve mat*x = rhs starting from ``guess`` via a correction system
        whose tolerance is rescaled so the original system still meets tol."""
        b_norm = np.linalg.norm(rhs)
        if b_norm == 0.0:
            return np.zeros_like(rhs)
        r0 = rhs - (mat @ guess)
        r0_norm = np.linalg.norm(r0)
        if r0_norm <= tol * b_norm:
            return guess.copy()
        eff_tol = tol * b_norm / r0_norm
        dx, rep = solver(mat, r0, eff_tol, self.cfg.max_iter)
        if not rep.converged:
            raise ConvergenceError(
                f"{label} solve failed at step {step_index}: "
                f"residual {rep.final_residual:.3e} after {rep.iterations} iterations")
        return guess + dx

    def advance(self, q: np.ndarray, psi: np.ndarray,
                step_index: int) -> tuple[np.ndarray, np.ndarray]:
        flux = _curl_flux_values(self.mesh, psi)
        mat, rhs = self.assembler.assemble(q, flux, self.f_values)
        q_new = self._solve_correction(solve_general, mat, rhs, q,
                                       self.cfg.tol_gen, "transport", step_index)
        # extrapolated warm start for the stream solve (result is unchanged:
        # the correction system is solved to the rescaled tolerance)
        if self.psi_prev is None:
            psi_guess = psi
        elif self.psi_prev2 is None:
            psi_guess = 2.0 * psi - self.psi_prev
        else:
            psi_guess = 3.0 * (psi - self.psi_prev) + self.psi_prev2
        psi_new = self._solve_correction(solve_spd, self.stream_matrix,
                                         q_new - self.y, psi_guess,
                                         self.cfg.tol_spd, "stream", step_index)
        self.psi_prev2 = self.psi_prev
        self.psi_prev = psi
        return q_new, psi_new


def step(state: FomState, cfg: FomConfig, f: Field) -> FomState:
    """One segregated BDF1 step: transport solve, then stream solve."""
    mesh = state.q.mesh
    if not (state.psi.mesh.same_geometry(mesh) and f.mesh.same_geometry(mesh)):
        raise ValueError("state fields and forcing live on different meshes")
    driver = _FomDriver(cfg, mesh)
    driver.f_values = f.values
    q_new, psi_new = driver.advance(state.q.values, state.psi.values, 0)
    return FomState(q=Field(mesh, q_new).check_finite(),
                    psi=Field(mesh, psi_new).check_finite(),
                    time=state.time + cfg.dt)


def run_fom(cfg: FomConfig, initial_state: FomState | None = None):
    """Integrate from q(t0) = y, storing snapshots every ``snapshot_stride``
    steps strictly after t0 and the kinetic energy at each stored instant.

    Returns (q snapshots, psi snapshots, energy trace). An explicit
    ``initial_state`` replaces the cold start (used to chain a spin-up
    phase in front of a sampling window).
    """
    from .diagnostics import EnergyTrace, kinetic_energy
    from .pod import SnapshotSet

    mesh = cfg.make_mesh()
    driver = _FomDriver(cfg, mesh)
    if initial_state is None:
        q = driver.y.copy()
        psi = np.zeros(mesh.n_cells)
    else:
        if not initial_state.q.mesh.same_geometry(mesh):
            raise ValueError("initial state lives on a different mesh")
        q = initial_state.q.values.copy()
        psi = initial_state.psi.values.copy()
    n_steps = cfg.n_steps()

    times: list[float] = []
    q_fields: list[Field] = []
    psi_fields: list[Field] = []
    energies: list[tuple[float, float]] = []
    for n in range(1, n_steps + 1):
        q, psi = driver.advance(q, psi, n)
        if n % cfg.snapshot_stride == 0:
            t = cfg.t0 + n * cfg.dt
            if not (np.isfinite(q).all() and np.isfinite(psi).all()):
                raise FloatingPointError(f"non-finite state at step {n} (t={t:g})")
            qf = Field(mesh, q.copy())
            pf = Field(mesh, psi.copy())
            times.append(t)
            q_fields.append(qf)
            psi_fields.append(pf)
            energies.append((t, kinetic_energy(pf, mesh)))

    snaps_q = SnapshotSet(mesh=mesh, times=np.array(times), fields=q_fields,
                          tag="q")
    snaps_psi = SnapshotSet(mesh=mesh, times=np.array(times), fields=psi_fields,
                            tag="psi")
    return snaps_q, snaps_psi, EnergyTrace(entries=energies)
