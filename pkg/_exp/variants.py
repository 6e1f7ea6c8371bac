import dataclasses, time
import numpy as np
from qgrom.mesh import build_mesh
from qgrom.field import Field, forcing_field, coordinate_field_y
from qgrom.store import read_snapshots
from qgrom.pod import compute_lifting, correlation_matrix, eigendecompose, build_basis, select_modes
from qgrom.rom import RomConfig, assemble_reduced_operators, project_initial, run_rom
from qgrom.diagnostics import relative_error, gyre_count, time_average

mesh = build_mesh(16, 32, (0, 1, -1, 1))
snaps_q = read_snapshots("_artifacts/case1/snapshots_q.bin")
snaps_p = read_snapshots("_artifacts/case1/snapshots_psi.bin")
lift, snaps_qh = compute_lifting(snaps_q)
lam_q, vec_q = eigendecompose(correlation_matrix(snaps_qh))
lam_p, vec_p = eigendecompose(correlation_matrix(snaps_p))
n_psi = select_modes(lam_p, 0.98)
basis_q = build_basis(snaps_qh, vec_q, lam_q, 40)
basis_psi = build_basis(snaps_p, vec_p, lam_p, n_psi)
ops_full = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh), "linear")
psi_mean_fom = time_average(snaps_p.fields)
xi = basis_psi.mode_matrix()

# cold init: q = y, psi = 0 (the pde initial condition)
init_cold = project_initial(coordinate_field_y(mesh), Field(mesh, np.zeros(mesh.n_cells)),
                            basis_q, basis_psi, t0=10.0)
print("cold init |beta|:", np.abs(init_cold.beta).max(), "|gamma|:", np.abs(init_cold.gamma).max())

def run(model, nq, alpha, init, label):
    ops = ops_full.truncate(nq, n_psi)
    st = dataclasses.replace(init, beta=init.beta[:nq], beta_bar=init.beta_bar[:nq],
                             gamma=init.gamma[:n_psi])
    cfg = RomConfig(model=model, dt=1e-4, t0=10.0, t_end=80.0, ro=0.0036, re=450.0,
                    n_q=nq, n_psi=n_psi, alpha=alpha, record_stride=1000)
    try:
        traj, _, _ = run_rom(st, ops, cfg)
        pm = Field(mesh, xi @ traj.mean_gamma())
        eps = relative_error(psi_mean_fom, pm); g = gyre_count(pm, mesh)
        print(f"{label}: {model} nq={nq} a={alpha}: eps={eps:.4g} gyres={g}")
    except (FloatingPointError, RuntimeError) as e:
        print(f"{label}: {model} nq={nq} a={alpha}: DIVERGED {e}")

run("qge_qge", 10, 0.0, init_cold, "cold")
run("qge_qge", 20, 0.0, init_cold, "cold")
run("qge_qge", 30, 0.0, init_cold, "cold")
run("qge_qge", 40, 0.0, init_cold, "cold")
for a in (0.1, 0.125, 0.13, 0.15, 0.175):
    run("bv_alpha", 10, a, init_cold, "cold")
for a in (0.1, 0.125, 0.13, 0.15):
    run("bv_alpha", 20, a, init_cold, "cold")
    run("bv_alpha", 30, a, init_cold, "cold")
