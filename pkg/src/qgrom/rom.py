"""Reduced-order models on POD bases.

Offline, every Gram entry is computed with the discrete FV operators of the
full-order model (homogeneous-wall Laplacian, divergence-free curl fluxes,
the same face interpolation for convection), so the Galerkin projection is
discretely consistent. Online, two dense solvers share the vorticity
transport system: the plain Galerkin model, and the filter-regularized
model that damps the vorticity coefficients through a linear differential
filter of radius alpha before driving the stream function.

Because the vorticity snapshots carry inhomogeneous wall data q = y, the
lifted mean field contributes three correction terms: a convection matrix
acting on the stream coefficients, a constant diffusion vector, and a mass
term in the stream-function equation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .diagnostics import EnergyTrace, green_gauss_gradient, relative_error
from .field import Field
from .fom import (
    _curl_flux_values,
    apply_convection,
    apply_laplacian,
    dirichlet_y_boundary_values,
    laplacian_boundary_term,
)
from .mesh import Mesh
from .pod import PodBasis

MODELS = ("qge_qge", "bv_alpha")


@dataclass
class ReducedOperators:
    """Dense Galerkin matrices, the convection tensor, and the lifting
    corrections induced by the inhomogeneous vorticity boundary data."""

    mass: np.ndarray          # (n_q, n_q)      vorticity-mode Gram
    cross_mass: np.ndarray    # (n_psi, n_q)    stream modes vs vorticity modes
    lap_q: np.ndarray         # (n_q, n_q)      vorticity modes vs their Laplacian
    lap_psi: np.ndarray       # (n_psi, n_psi)  stream modes vs their Laplacian
    convection: np.ndarray    # (n_q, n_psi, n_q)  [i, j, k] = (mode_i, div(curl(xi_j) mode_k))
    planetary: np.ndarray     # (n_psi,)        stream modes vs the coordinate field y
    forcing: np.ndarray       # (n_q,)          vorticity modes vs the forcing
    conv_lift: np.ndarray     # (n_q, n_psi)    convection of the lifting field
    lap_lift: np.ndarray      # (n_q,)          Laplacian of the lifting field (wall data y)
    mass_lift: np.ndarray     # (n_psi,)        stream modes vs the lifting field
    energy_gram: np.ndarray   # (n_psi, n_psi)  gradient Gram for kinetic-energy traces

    @property
    def n_q(self) -> int:
        return self.mass.shape[0]

    @property
    def n_psi(self) -> int:
        return self.cross_mass.shape[0]

    def truncate(self, n_q: int, n_psi: int) -> "ReducedOperators":
        """Restrict to leading mode counts; Gram entries are unchanged."""
        if n_q > self.n_q or n_psi > self.n_psi:
            raise ValueError("cannot truncate to more modes than assembled")
        return ReducedOperators(
            mass=self.mass[:n_q, :n_q],
            cross_mass=self.cross_mass[:n_psi, :n_q],
            lap_q=self.lap_q[:n_q, :n_q],
            lap_psi=self.lap_psi[:n_psi, :n_psi],
            convection=self.convection[:n_q, :n_psi, :n_q],
            planetary=self.planetary[:n_psi],
            forcing=self.forcing[:n_q],
            conv_lift=self.conv_lift[:n_q, :n_psi],
            lap_lift=self.lap_lift[:n_q],
            mass_lift=self.mass_lift[:n_psi],
            energy_gram=self.energy_gram[:n_psi, :n_psi],
        )


@dataclass
class RomState:
    beta: np.ndarray       # vorticity coefficients
    beta_bar: np.ndarray   # filtered vorticity coefficients
    gamma: np.ndarray      # stream-function coefficients
    time: float


@dataclass
class RomConfig:
    model: str
    dt: float
    t0: float
    t_end: float
    ro: float
    re: float
    n_q: int
    n_psi: int
    alpha: float = 0.0
    record_stride: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.dt <= 0 or self.t_end <= self.t0:
            raise ValueError("bad time window")
        if self.n_q < 1 or self.n_psi < 1:
            raise ValueError("mode counts must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))


@dataclass
class RomTrajectory:
    times: np.ndarray
    beta: np.ndarray       # (n_rec, n_q)
    beta_bar: np.ndarray   # (n_rec, n_q)
    gamma: np.ndarray      # (n_rec, n_psi)

    def mean_gamma(self) -> np.ndarray:
        return self.gamma.mean(axis=0)


def assemble_reduced_operators(basis_q: PodBasis, basis_psi: PodBasis,
                               mesh: Mesh, forcing: Field,
                               convection_scheme: str = "linear") -> ReducedOperators:
    """Project the discrete FV operators onto the POD bases."""
    if not (basis_q.mesh.same_geometry(mesh) and basis_psi.mesh.same_geometry(mesh)
            and forcing.mesh.same_geometry(mesh)):
        raise ValueError("bases and forcing must share one mesh")
    if basis_q.lifting is None:
        raise ValueError("vorticity basis carries no lifting field")

    phi = basis_q.mode_matrix()          # (n_cells, n_q)
    xi = basis_psi.mode_matrix()         # (n_cells, n_psi)
    vol = mesh.cell_volumes
    wphi = phi * vol[:, None]
    wxi = xi * vol[:, None]
    n_q = phi.shape[1]
    n_psi = xi.shape[1]

    mass = wphi.T @ phi
    cross_mass = wxi.T @ phi
    lap_phi = np.column_stack([apply_laplacian(mesh, phi[:, k]) for k in range(n_q)])
    lap_xi = np.column_stack([apply_laplacian(mesh, xi[:, k]) for k in range(n_psi)])
    lap_q = wphi.T @ lap_phi
    lap_psi = wxi.T @ lap_xi

    lift = basis_q.lifting.values
    convection = np.empty((n_q, n_psi, n_q))
    conv_lift = np.empty((n_q, n_psi))
    for j in range(n_psi):
        flux = _curl_flux_values(mesh, xi[:, j])
        images = np.column_stack([
            apply_convection(mesh, flux, phi[:, k], convection_scheme)
            for k in range(n_q)])
        convection[:, j, :] = wphi.T @ images
        conv_lift[:, j] = wphi.T @ apply_convection(mesh, flux, lift,
                                                    convection_scheme)

    lift_lap = apply_laplacian(mesh, lift) \
        + laplacian_boundary_term(mesh, dirichlet_y_boundary_values(mesh))
    lap_lift = wphi.T @ lift_lap
    planetary = wxi.T @ mesh.cell_centroids[:, 1]
    forcing_vec = wphi.T @ forcing.values
    mass_lift = wxi.T @ lift

    grads = [green_gauss_gradient(mesh, xi[:, j]) for j in range(n_psi)]
    gxs = np.column_stack([g[0] for g in grads])
    gys = np.column_stack([g[1] for g in grads])
    energy_gram = (gxs * vol[:, None]).T @ gxs + (gys * vol[:, None]).T @ gys

    return ReducedOperators(mass=mass, cross_mass=cross_mass, lap_q=lap_q,
                            lap_psi=lap_psi, convection=convection,
                            planetary=planetary, forcing=forcing_vec,
                            conv_lift=conv_lift, lap_lift=lap_lift,
                            mass_lift=mass_lift, energy_gram=energy_gram)


def project_initial(field_q: Field, field_psi: Field, basis_q: PodBasis,
                    basis_psi: PodBasis, t0: float = 0.0) -> RomState:
    """L2-project a full-order state onto the bases (lifting subtracted)."""
    mesh = basis_q.mesh
    if not (field_q.mesh.same_geometry(mesh) and field_psi.mesh.same_geometry(mesh)):
        raise ValueError("fields live on a different mesh")
    if basis_q.lifting is None:
        raise ValueError("vorticity basis carries no lifting field")
    vol = mesh.cell_volumes
    dq = (field_q.values - basis_q.lifting.values) * vol
    beta = basis_q.mode_matrix().T @ dq
    gamma = basis_psi.mode_matrix().T @ (field_psi.values * vol)
    return RomState(beta=beta, beta_bar=beta.copy(), gamma=gamma, time=t0)


class _OnlineSolver:
    """Prefactored dense systems for the online loop.

    The stream-function matrix and the filter matrix are constant in time
    and LU-factored once; only the vorticity system is rebuilt per step
    because the convection matrix depends on the stream coefficients.
    """

    def __init__(self, ops: ReducedOperators, cfg: RomConfig):
        if ops.n_q != cfg.n_q or ops.n_psi != cfg.n_psi:
            raise ValueError(
                f"operator dims ({ops.n_q}, {ops.n_psi}) do not match config "
                f"({cfg.n_q}, {cfg.n_psi})")
        self.cfg = cfg
        self.ops = ops
        self.mass_dt = ops.mass / cfg.dt
        self.visc = ops.lap_q / cfg.re
        self.rhs_const = ops.forcing + ops.lap_lift / cfg.re
        self.stream_lu = sla.lu_factor(-cfg.ro * ops.lap_psi)
        self.stream_rhs_const = ops.mass_lift - ops.planetary
        if cfg.model == "bv_alpha":
            a2 = cfg.alpha ** 2
            self.filter_lu = sla.lu_factor(ops.mass - a2 * ops.lap_q)
            self.filter_rhs_const = a2 * ops.lap_lift
        else:
            self.filter_lu = None
            self.filter_rhs_const = None

    def step(self, beta: np.ndarray, gamma: np.ndarray,
             step_index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ops = self.ops
        system = self.mass_dt - self.visc \
            + np.tensordot(gamma, ops.convection, axes=(0, 1))
        rhs = self.rhs_const + self.mass_dt @ beta - ops.conv_lift @ gamma
        try:
            beta_new = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"singular vorticity system at step {step_index}") from exc
        if not np.isfinite(beta_new).all():
            # stop before non-finite data reaches the factored solves
            raise FloatingPointError(f"vorticity coefficients overflowed at step {step_index}")
        if self.filter_lu is not None:
            beta_bar = sla.lu_solve(self.filter_lu,
                                    ops.mass @ beta_new + self.filter_rhs_const)
        else:
            beta_bar = beta_new
        gamma_new = sla.lu_solve(self.stream_lu,
                                 ops.cross_mass @ beta_bar + self.stream_rhs_const)
        return beta_new, beta_bar, gamma_new


def step_qge_qge(state: RomState, ops: ReducedOperators, cfg: RomConfig) -> RomState:
    """One implicit step of the plain Galerkin model (no filter)."""
    if cfg.model != "qge_qge":
        raise ValueError("config is not set up for the qge_qge model")
    solver = _OnlineSolver(ops, cfg)
    beta, beta_bar, gamma = solver.step(state.beta, state.gamma, 0)
    return RomState(beta=beta, beta_bar=beta_bar, gamma=gamma,
                    time=state.time + cfg.dt)


def step_bv_alpha(state: RomState, ops: ReducedOperators, cfg: RomConfig) -> RomState:
    """One implicit step of the filter-regularized model."""
    if cfg.model != "bv_alpha":
        raise ValueError("config is not set up for the bv_alpha model")
    solver = _OnlineSolver(ops, cfg)
    beta, beta_bar, gamma = solver.step(state.beta, state.gamma, 0)
    return RomState(beta=beta, beta_bar=beta_bar, gamma=gamma,
                    time=state.time + cfg.dt)


def run_rom(init: RomState, ops: ReducedOperators,
            cfg: RomConfig) -> tuple[RomTrajectory, EnergyTrace, float]:
    """March the online model, recording coefficients and kinetic energy
    every ``record_stride`` steps. Returns the trajectory, the energy trace
    and the wall time spent in the linear-algebra stepping."""
    solver = _OnlineSolver(ops, cfg)
    beta = np.asarray(init.beta, dtype=float).copy()
    gamma = np.asarray(init.gamma, dtype=float).copy()
    beta_bar = np.asarray(init.beta_bar, dtype=float).copy()
    n_steps = cfg.n_steps()

    times = []
    betas = []
    beta_bars = []
    gammas = []
    energies = []
    online_seconds = 0.0
    for n in range(1, n_steps + 1):
        tic = time.perf_counter()
        beta, beta_bar, gamma = solver.step(beta, gamma, n)
        online_seconds += time.perf_counter() - tic
        if n % cfg.record_stride == 0:
            t = cfg.t0 + n * cfg.dt
            if not (np.isfinite(beta).all() and np.isfinite(gamma).all()
                    and np.isfinite(beta_bar).all()):
                raise FloatingPointError(
                    f"reduced solution diverged by step {n} (t={t:g})")
            times.append(t)
            betas.append(beta.copy())
            beta_bars.append(beta_bar.copy())
            gammas.append(gamma.copy())
            energies.append((t, float(0.5 * gamma @ ops.energy_gram @ gamma)))

    traj = RomTrajectory(times=np.array(times), beta=np.array(betas),
                         beta_bar=np.array(beta_bars), gamma=np.array(gammas))
    return traj, EnergyTrace(entries=energies), online_seconds


def reconstruct(state: RomState, basis_q: PodBasis,
                basis_psi: PodBasis) -> tuple[Field, Field, Field]:
    """Physical-space fields (q, psi, filtered q); the lifting is added back
    to both vorticity fields."""
    if basis_q.lifting is None:
        raise ValueError("vorticity basis carries no lifting field")
    n_q = state.beta.size
    n_psi = state.gamma.size
    if n_q > basis_q.retained or n_psi > basis_psi.retained:
        raise ValueError("state has more coefficients than retained modes")
    mesh = basis_q.mesh
    phi = basis_q.mode_matrix()[:, :n_q]
    xi = basis_psi.mode_matrix()[:, :n_psi]
    lift = basis_q.lifting.values
    q_r = Field(mesh, lift + phi @ state.beta)
    q_bar_r = Field(mesh, lift + phi @ state.beta_bar)
    psi_r = Field(mesh, xi @ state.gamma)
    return q_r, psi_r, q_bar_r


@dataclass
class AlphaCalibration:
    alpha: float
    records: list[dict]


def calibrate_alpha(candidates: list[float], ops: ReducedOperators,
                    init: RomState, cfg: RomConfig, basis_psi: PodBasis,
                    psi_mean_fom: Field) -> AlphaCalibration:
    """Sweep filter radii and return the one minimizing the relative error
    of the time-averaged stream function; ties go to the smaller radius."""
    if not candidates:
        raise ValueError("empty candidate list")
    xi = basis_psi.mode_matrix()[:, :cfg.n_psi]
    mesh = basis_psi.mesh
    records = []
    best_alpha = None
    best_eps = np.inf
    for alpha in sorted(float(a) for a in candidates):
        run_cfg = replace(cfg, model="bv_alpha", alpha=alpha)
        rec = {"alpha": alpha, "epsilon": np.nan, "status": "ok"}
        try:
            traj, _, _ = run_rom(init, ops, run_cfg)
            psi_mean_rom = Field(mesh, xi @ traj.mean_gamma())
            rec["epsilon"] = relative_error(psi_mean_fom, psi_mean_rom)
        except (FloatingPointError, RuntimeError) as exc:
            rec["status"] = f"diverged: {exc}"
        records.append(rec)
        if rec["status"] == "ok" and rec["epsilon"] < best_eps:
            best_eps = rec["epsilon"]
            best_alpha = alpha
    if best_alpha is None:
        lines = "; ".join(f"alpha={r['alpha']:g}: {r['status']}" for r in records)
        raise RuntimeError(f"all filter calibration runs diverged ({lines})")
    return AlphaCalibration(alpha=best_alpha, records=records)
