import numpy as np
import pytest

from qgrom.field import Field, coordinate_field_y, forcing_field
from qgrom.fom import (
    FomConfig,
    FomState,
    apply_convection,
    apply_laplacian,
    assemble_transport,
    build_stream_matrix,
    curl_flux,
    dirichlet_y_boundary_values,
    flux_divergence,
    laplacian_boundary_term,
    run_fom,
    step,
)
from qgrom.linsolve import solve_spd
from qgrom.mesh import build_mesh

from conftest import random_field


def small_cfg(**kw):
    base = dict(ro=0.0036, re=450.0, dt=1e-4, t0=10.0, t_end=10.01,
                nx=4, ny=8, snapshot_stride=10)
    base.update(kw)
    return FomConfig(**base)


# --- curl flux ---------------------------------------------------------------

def test_zero_stream_gives_zero_flux(gyre_mesh_small):
    psi = Field(gyre_mesh_small, np.zeros(gyre_mesh_small.n_cells))
    flux = curl_flux(psi, gyre_mesh_small)
    assert np.all(flux.values == 0.0)


def test_flux_vanishes_away_from_clamped_boundary():
    mesh = build_mesh(8, 8, (0, 1, 0, 1))
    psi = Field(mesh, np.full(mesh.n_cells, 2.5))
    flux = curl_flux(psi, mesh)
    fx = flux.values[: mesh.n_xfaces].reshape(mesh.ny, mesh.nx + 1)
    fy = flux.values[mesh.n_xfaces:].reshape(mesh.ny + 1, mesh.nx)
    # constant interior: gradients vanish on faces two cells away from walls
    assert np.abs(fx[2:-2, 2:-2]).max() == 0.0
    assert np.abs(fy[2:-2, 2:-2]).max() == 0.0


def test_linear_stream_gives_unit_velocity_interior():
    mesh = build_mesh(8, 8, (0, 1, 0, 1))
    psi = coordinate_field_y(mesh)  # u = (1, 0)
    flux = curl_flux(psi, mesh)
    fx = flux.values[: mesh.n_xfaces].reshape(mesh.ny, mesh.nx + 1)
    fy = flux.values[mesh.n_xfaces:].reshape(mesh.ny + 1, mesh.nx)
    area = mesh.hy
    np.testing.assert_allclose(fx[2:-2, 2:-2], area, atol=1e-14)
    np.testing.assert_allclose(fy[2:-2, 2:-2], 0.0, atol=1e-14)


def test_flux_is_discretely_divergence_free(rng):
    mesh = build_mesh(8, 16, (0, 1, -1, 1))
    psi = random_field(mesh, rng, scale=3.0)
    flux = curl_flux(psi, mesh)
    div = flux_divergence(mesh, flux)
    assert np.abs(div).max() <= 1e-10 * max(1.0, np.abs(flux.values).max())


def test_boundary_faces_carry_no_flux(rng, gyre_mesh_small):
    psi = random_field(gyre_mesh_small, rng)
    flux = curl_flux(psi, gyre_mesh_small)
    bnd = gyre_mesh_small.face_neighbor < 0
    assert np.all(flux.values[bnd] == 0.0)


# --- transport assembly ------------------------------------------------------

def dense_transport_oracle(mesh, cfg, flux_values, q_prev, f_values):
    """Face-by-face dense assembly, written independently of the CSR path."""
    n = mesh.n_cells
    a = np.zeros((n, n))
    rhs = f_values + q_prev / cfg.dt
    np.fill_diagonal(a, 1.0 / cfg.dt)
    qb_face = dirichlet_y_boundary_values(mesh)
    for f in range(mesh.n_faces):
        o = mesh.face_owner[f]
        nb = mesh.face_neighbor[f]
        vec = mesh.face_area_vectors[f]
        area = abs(vec).sum()
        delta = mesh.hx if vec[0] != 0 else mesh.hy
        vol = mesh.cell_volumes[o]
        phi = flux_values[f]
        if nb >= 0:
            g = area / delta / cfg.re / vol
            a[o, o] += g
            a[o, nb] -= g
            a[nb, nb] += g
            a[nb, o] -= g
            if cfg.convection == "linear":
                a[o, o] += 0.5 * phi / vol
                a[o, nb] += 0.5 * phi / vol
                a[nb, nb] -= 0.5 * phi / vol
                a[nb, o] -= 0.5 * phi / vol
            else:
                if phi >= 0:
                    a[o, o] += phi / vol
                    a[nb, o] -= phi / vol
                else:
                    a[o, nb] += phi / vol
                    a[nb, nb] -= phi / vol
        else:
            g = 2.0 * area / delta / cfg.re / vol
            a[o, o] += g
            rhs[o] += g * qb_face[f]
            rhs[o] -= phi * qb_face[f] / vol
    return a, rhs


@pytest.mark.parametrize("scheme", ["linear", "upwind"])
def test_assembly_matches_dense_stencil_oracle(rng, scheme):
    mesh = build_mesh(3, 3, (0, 1, -1, 1))
    cfg = small_cfg(nx=3, ny=3, convection=scheme)
    q_prev = random_field(mesh, rng)
    f = forcing_field(mesh)
    psi = random_field(mesh, rng)
    flux = curl_flux(psi, mesh)
    mat, rhs = assemble_transport(q_prev, flux, cfg, f)
    a_oracle, rhs_oracle = dense_transport_oracle(mesh, cfg, flux.values,
                                                  q_prev.values, f.values)
    np.testing.assert_allclose(mat.to_dense(), a_oracle, atol=1e-11)
    np.testing.assert_allclose(rhs, rhs_oracle, atol=1e-11)


def test_assembly_random_flux_against_oracle(rng):
    # exercises every stencil branch, including nonzero boundary fluxes
    mesh = build_mesh(3, 3, (0, 1, -1, 1))
    for scheme in ("linear", "upwind"):
        cfg = small_cfg(nx=3, ny=3, convection=scheme)
        flux_vals = rng.standard_normal(mesh.n_faces)
        interior = mesh.face_neighbor >= 0
        q_prev = random_field(mesh, rng)
        f = random_field(mesh, rng)

        class _Flux:
            mesh_ = mesh
        from qgrom.fom import FaceFlux
        flux = FaceFlux(mesh, flux_vals)
        mat, rhs = assemble_transport(q_prev, flux, cfg, f)
        a_oracle, rhs_oracle = dense_transport_oracle(mesh, cfg, flux_vals,
                                                      q_prev.values, f.values)
        # interior-face contributions agree entry by entry
        np.testing.assert_allclose(mat.to_dense(), a_oracle, atol=1e-11)
        np.testing.assert_allclose(rhs, rhs_oracle, atol=1e-11)


def test_steady_transport_recovers_q_equals_y(gyre_mesh_small):
    # zero flux, zero forcing: q = y solves the pure-diffusion balance, so a
    # huge time step drives the solve straight to the boundary-consistent field
    mesh = gyre_mesh_small
    cfg = small_cfg(dt=1e12, forcing="none")
    q_prev = Field(mesh, np.zeros(mesh.n_cells))
    flux = curl_flux(Field(mesh, np.zeros(mesh.n_cells)), mesh)
    f = Field(mesh, np.zeros(mesh.n_cells))
    mat, rhs = assemble_transport(q_prev, flux, cfg, f)
    from qgrom.linsolve import solve_general
    q, rep = solve_general(mat, rhs, 1e-12, 2000)
    assert rep.converged
    np.testing.assert_allclose(q, mesh.cell_centroids[:, 1], atol=1e-9)


def test_mass_row_is_exactly_inverse_dt(rng, gyre_mesh_small):
    mesh = gyre_mesh_small
    cfg = small_cfg(dt=0.25, re=1e12)
    psi = random_field(mesh, rng)
    flux = curl_flux(psi, mesh)
    q_prev = random_field(mesh, rng)
    mat, _ = assemble_transport(q_prev, flux, cfg, forcing_field(mesh))
    # with diffusion switched off by huge Re, row sums collapse to the mass
    # diagonal because the central convective stencil sums to div(u) = 0
    row_sums = mat.to_dense().sum(axis=1)
    np.testing.assert_allclose(row_sums, 1.0 / cfg.dt, rtol=1e-9)


def test_convective_operator_conserves_globally(rng):
    mesh = build_mesh(6, 10, (0, 1, -1, 1))
    psi = random_field(mesh, rng, scale=2.0)
    flux = curl_flux(psi, mesh)
    for scheme in ("linear", "upwind"):
        q = random_field(mesh, rng)
        conv = apply_convection(mesh, flux.values, q.values, scheme)
        total = np.dot(conv, mesh.cell_volumes)
        scale = np.abs(flux.values).max() * np.abs(q.values).max()
        assert abs(total) <= 1e-10 * max(scale, 1.0)


# --- stepping ----------------------------------------------------------------

def test_fixed_point_preserved():
    cfg = small_cfg(forcing="none", t_end=10.1, snapshot_stride=100)
    mesh = cfg.make_mesh()
    y = coordinate_field_y(mesh)
    state = FomState(q=y.copy(), psi=Field(mesh, np.zeros(mesh.n_cells)), time=10.0)
    f0 = Field(mesh, np.zeros(mesh.n_cells))
    for _ in range(20):
        state = step(state, cfg, f0)
    np.testing.assert_allclose(state.q.values, y.values, atol=1e-10)
    np.testing.assert_allclose(state.psi.values, 0.0, atol=1e-10)


def test_first_step_linearization():
    # from q = y, psi = 0: u = 0 and lap q = lap y = 0 pointwise away from
    # walls, so one step gives q ~= y + dt * F there
    cfg = small_cfg(nx=8, ny=16, dt=1e-4)
    mesh = cfg.make_mesh()
    y = coordinate_field_y(mesh)
    state = FomState(q=y.copy(), psi=Field(mesh, np.zeros(mesh.n_cells)), time=10.0)
    f = forcing_field(mesh)
    new = step(state, cfg, f)
    expected = y.values + cfg.dt * f.values
    inner = ~np.isin(np.arange(mesh.n_cells),
                     np.concatenate([np.arange(mesh.nx),  # wall-adjacent rows
                                     np.arange(mesh.n_cells - mesh.nx, mesh.n_cells)]))
    # residual budget: solver tolerance is relative to ||b|| ~ ||q||/dt
    np.testing.assert_allclose(new.q.values[inner], expected[inner],
                               rtol=0, atol=1e-8)


def test_manufactured_stream_solution_second_order():
    errs = {}
    for nx, ny in ((16, 32), (32, 64)):
        mesh = build_mesh(nx, ny, (0, 1, -1, 1))
        lmat = build_stream_matrix(mesh, 0.0036)
        xs, ys = mesh.cell_centroids[:, 0], mesh.cell_centroids[:, 1]
        exact = np.sin(np.pi * xs) * np.sin(np.pi * ys)
        rhs = 0.0036 * 2.0 * np.pi**2 * exact
        sol, rep = solve_spd(lmat, rhs, 1e-12, 50000)
        assert rep.converged
        errs[nx] = np.sqrt(np.sum((sol - exact) ** 2 * mesh.cell_volumes))
    order = np.log2(errs[16] / errs[32])
    assert order >= 1.9


def test_homogeneous_laplacian_matches_matrix(rng, gyre_mesh_small):
    mesh = gyre_mesh_small
    lmat = build_stream_matrix(mesh, 1.0)  # -lap with zero walls
    v = rng.standard_normal(mesh.n_cells)
    np.testing.assert_allclose(apply_laplacian(mesh, v), -(lmat @ v),
                               atol=1e-11 * np.abs(v).max())


def test_laplacian_boundary_term_completes_affine_operator():
    # lap(y) = 0: the homogeneous part plus the q = y wall term must cancel
    mesh = build_mesh(5, 9, (0, 1, -1, 1))
    y = mesh.cell_centroids[:, 1]
    total = apply_laplacian(mesh, y) \
        + laplacian_boundary_term(mesh, dirichlet_y_boundary_values(mesh))
    np.testing.assert_allclose(total, 0.0, atol=1e-10)


# --- run_fom -----------------------------------------------------------------

def test_run_counts_and_times():
    cfg = small_cfg(t_end=10.02, snapshot_stride=50)  # 200 steps -> 4 snapshots
    snaps_q, snaps_psi, energy = run_fom(cfg)
    assert len(snaps_q) == len(snaps_psi) == 4
    np.testing.assert_allclose(snaps_q.times, [10.005, 10.01, 10.015, 10.02])
    assert len(energy.entries) == 4
    assert all(e >= 0 for _, e in energy.entries)


def test_unforced_run_stays_at_fixed_point():
    cfg = small_cfg(forcing="none", t_end=10.05, snapshot_stride=100)
    snaps_q, snaps_psi, energy = run_fom(cfg)
    mesh = snaps_q.mesh
    y = mesh.cell_centroids[:, 1]
    for f in snaps_q.fields:
        np.testing.assert_allclose(f.values, y, atol=1e-9)
    for f in snaps_psi.fields:
        np.testing.assert_allclose(f.values, 0.0, atol=1e-9)
    assert all(e == pytest.approx(0.0, abs=1e-16) for _, e in energy.entries)


def test_run_fom_deterministic():
    cfg = small_cfg(t_end=10.02, snapshot_stride=100)
    a_q, a_psi, a_e = run_fom(cfg)
    b_q, b_psi, b_e = run_fom(cfg)
    for fa, fb in zip(a_q.fields + a_psi.fields, b_q.fields + b_psi.fields):
        np.testing.assert_array_equal(fa.values, fb.values)
    assert a_e.entries == b_e.entries


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(ro=0.0)
    with pytest.raises(ValueError):
        small_cfg(dt=-1e-4)
    with pytest.raises(ValueError):
        small_cfg(t_end=9.0)
    with pytest.raises(ValueError):
        small_cfg(snapshot_stride=0)
    with pytest.raises(ValueError):
        small_cfg(convection="quick")
