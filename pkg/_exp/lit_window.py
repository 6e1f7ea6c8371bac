# evaluate the spec-literal protocol: cold start at t0=10, window (10, 80]
import dataclasses
import numpy as np
from qgrom.mesh import build_mesh
from qgrom.field import Field, forcing_field, coordinate_field_y
from qgrom.pod import SnapshotSet, compute_lifting, correlation_matrix, eigendecompose, build_basis, select_modes
from qgrom.rom import RomConfig, assemble_reduced_operators, project_initial, run_rom
from qgrom.diagnostics import relative_error, gyre_count, time_average

mesh = build_mesh(16, 32, (0, 1, -1, 1))
d = np.load("_exp/long_linear.npz")
t = d["t"]
m = (t > 10.0) & (t <= 80.0)
times = t[m]
print("snapshots:", m.sum())
snap_q = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["q"][m]], tag="q")
snap_p = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["psi"][m]], tag="psi")
lift, snap_qh = compute_lifting(snap_q)
lam_q, vec_q = eigendecompose(correlation_matrix(snap_qh))
lam_p, vec_p = eigendecompose(correlation_matrix(snap_p))
n_psi = select_modes(lam_p, 0.98)
cum = np.cumsum(lam_q) / lam_q.sum()
print(f"n_psi={n_psi} qE at 10/20/30/40: {cum[9]:.1%} {cum[19]:.1%} {cum[29]:.1%} {cum[39]:.1%}")
basis_q = build_basis(snap_qh, vec_q, lam_q, 40)
basis_psi = build_basis(snap_p, vec_p, lam_p, n_psi)
ops_full = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh), "linear")
init_full = project_initial(coordinate_field_y(mesh), Field(mesh, np.zeros(mesh.n_cells)),
                            basis_q, basis_psi, t0=10.0)
psi_mean_fom = time_average(snap_p.fields)
print("FOM gyres:", gyre_count(psi_mean_fom, mesh))
xi = basis_psi.mode_matrix()

def run(model, nq, alpha=0.0):
    ops = ops_full.truncate(nq, n_psi)
    st = dataclasses.replace(init_full, beta=init_full.beta[:nq],
                             beta_bar=init_full.beta_bar[:nq], gamma=init_full.gamma[:n_psi])
    cfg = RomConfig(model=model, dt=1e-4, t0=10.0, t_end=80.0, ro=0.0036, re=450.0,
                    n_q=nq, n_psi=n_psi, alpha=alpha, record_stride=1000)
    try:
        traj, _, _ = run_rom(st, ops, cfg)
        pm = Field(mesh, xi @ traj.mean_gamma())
        eps = relative_error(psi_mean_fom, pm); g = gyre_count(pm, mesh)
        print(f"lit: {model} nq={nq} a={alpha}: eps={eps:.4g} gyres={g}", flush=True)
    except (FloatingPointError, RuntimeError) as e:
        print(f"lit: {model} nq={nq} a={alpha}: DIVERGED {e}", flush=True)

for nq in (10, 20, 30, 40):
    run("qge_qge", nq)
for a in (0.05, 0.1, 0.125, 0.13, 0.15, 0.175, 0.2, 0.3):
    run("bv_alpha", 10, a)
for a in (0.1, 0.125, 0.13, 0.15, 0.175):
    run("bv_alpha", 20, a)
    run("bv_alpha", 30, a)
