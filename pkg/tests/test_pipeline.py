"""End-to-end pipeline checks on a miniature configuration, plus ordering
properties read off the cached case-1 benchmark report."""

import dataclasses

import pytest

from qgrom.bench import BenchCase, run_fom_with_spinup
from qgrom.diagnostics import relative_error, time_average
from qgrom.field import Field, forcing_field
from qgrom.pod import build_basis, compute_lifting, correlation_matrix, \
    eigendecompose, select_modes
from qgrom.rom import RomConfig, assemble_reduced_operators, project_initial, \
    run_rom


@pytest.fixture(scope="module")
def tiny_pipeline():
    """FOM + POD on a 4x8 mesh, 20 snapshots."""
    case = BenchCase(label="tiny", ro=0.05, re=60.0, nx=4, ny=8, dt=1e-3,
                     t0=1.0, t_end=3.0, snapshot_stride=100, spin_up=1.0)
    cfg = case.fom_config()
    snaps_q, snaps_psi, _, state0, _ = run_fom_with_spinup(cfg, case.spin_up)
    assert len(snaps_q) == 20
    mesh = snaps_q.mesh
    lift, snaps_qh = compute_lifting(snaps_q)
    lam_q, vec_q = eigendecompose(correlation_matrix(snaps_qh))
    lam_p, vec_p = eigendecompose(correlation_matrix(snaps_psi))
    # physical spectra decay exponentially; modes below ~1e-6 * lam_1 are
    # numerically degenerate and cannot stay orthonormal to 1e-8
    rank_q = int((lam_q > 1e-6 * lam_q[0]).sum())
    rank_p = int((lam_p > 1e-6 * lam_p[0]).sum())
    basis_q = build_basis(snaps_qh, vec_q, lam_q, rank_q)
    basis_psi = build_basis(snaps_psi, vec_p, lam_p, rank_p)
    ops = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh))
    init = project_initial(state0.q, state0.psi, basis_q, basis_psi, t0=cfg.t0)
    psi_mean_fom = time_average(snaps_psi.fields)
    return case, mesh, basis_q, basis_psi, ops, init, psi_mean_fom


def _run_eps(case, mesh, basis_psi, ops, init, psi_mean_fom, n_q, n_psi,
             model="qge_qge", alpha=0.0):
    cfg = case.fom_config()
    sub = ops.truncate(n_q, n_psi)
    state = dataclasses.replace(init, beta=init.beta[:n_q],
                                beta_bar=init.beta_bar[:n_q],
                                gamma=init.gamma[:n_psi])
    rom_cfg = RomConfig(model=model, dt=cfg.dt, t0=cfg.t0, t_end=cfg.t_end,
                        ro=cfg.ro, re=cfg.re, n_q=n_q, n_psi=n_psi, alpha=alpha,
                        record_stride=case.snapshot_stride)
    traj, _, _ = run_rom(state, sub, rom_cfg)
    xi = basis_psi.mode_matrix()[:, :n_psi]
    psi_mean_rom = Field(mesh, xi @ traj.mean_gamma())
    return relative_error(psi_mean_fom, psi_mean_rom)


def test_richer_basis_reconstructs_better(tiny_pipeline):
    case, mesh, basis_q, basis_psi, ops, init, psi_mean_fom = tiny_pipeline
    eps_full = _run_eps(case, mesh, basis_psi, ops, init, psi_mean_fom,
                        basis_q.retained, basis_psi.retained)
    eps_small = _run_eps(case, mesh, basis_psi, ops, init, psi_mean_fom,
                         2, basis_psi.retained)
    assert eps_full < eps_small
    assert eps_full < 0.1  # near-complete basis tracks the training data


def test_filter_stays_close_at_small_alpha(tiny_pipeline):
    case, mesh, basis_q, basis_psi, ops, init, psi_mean_fom = tiny_pipeline
    n_q, n_psi = basis_q.retained, basis_psi.retained
    eps_plain = _run_eps(case, mesh, basis_psi, ops, init, psi_mean_fom,
                         n_q, n_psi)
    eps_filter = _run_eps(case, mesh, basis_psi, ops, init, psi_mean_fom,
                          n_q, n_psi, model="bv_alpha", alpha=1e-6)
    assert eps_filter == pytest.approx(eps_plain, abs=1e-6)


def test_case1_epsilon_decreases_with_mode_count(case1):
    for model in ("qge_qge", "bv_alpha"):
        eps = [case1.row(model, n)["epsilon"] for n in (10, 20, 30)]
        assert eps[2] <= eps[1] <= eps[0], (model, eps)
