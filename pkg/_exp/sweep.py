import dataclasses, time
import numpy as np
from qgrom.mesh import build_mesh
from qgrom.field import Field, forcing_field
from qgrom.pod import SnapshotSet, compute_lifting, correlation_matrix, eigendecompose, build_basis, select_modes
from qgrom.rom import RomConfig, assemble_reduced_operators, project_initial, run_rom
from qgrom.diagnostics import relative_error, gyre_count, time_average

mesh = build_mesh(16, 32, (0, 1, -1, 1))
d = np.load("_exp/long_linear.npz")
t = d["t"]
m = (t > 20.0) & (t <= 90.0)
times = t[m]
snap_q = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["q"][m]], tag="q")
snap_p = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["psi"][m]], tag="psi")
lift, snap_qh = compute_lifting(snap_q)
lam_q, vec_q = eigendecompose(correlation_matrix(snap_qh))
lam_p, vec_p = eigendecompose(correlation_matrix(snap_p))
n_psi = select_modes(lam_p, 0.98)
basis_q = build_basis(snap_qh, vec_q, lam_q, 40)
basis_psi = build_basis(snap_p, vec_p, lam_p, n_psi)
ops_full = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh), "linear")
i0 = int(np.argmin(np.abs(t - 20.0)))
init_full = project_initial(Field(mesh, d["q"][i0]), Field(mesh, d["psi"][i0]), basis_q, basis_psi, t0=10.0)
psi_mean_fom = time_average(snap_p.fields)
xi = basis_psi.mode_matrix()

def run(model, nq, alpha):
    ops = ops_full.truncate(nq, n_psi)
    init = dataclasses.replace(init_full, beta=init_full.beta[:nq],
                               beta_bar=init_full.beta_bar[:nq], gamma=init_full.gamma[:n_psi])
    cfg = RomConfig(model=model, dt=1e-4, t0=10.0, t_end=80.0, ro=0.0036, re=450.0,
                    n_q=nq, n_psi=n_psi, alpha=alpha, record_stride=1000)
    try:
        traj, _, online = run_rom(init, ops, cfg)
    except FloatingPointError as e:
        print(f"{model} nq={nq} a={alpha}: DIVERGED"); return
    pm = Field(mesh, xi @ traj.mean_gamma())
    eps = relative_error(psi_mean_fom, pm)
    g = gyre_count(pm, mesh)
    prof = pm.values.reshape(32, 16)[:, 7]
    # band peaks relative to global max
    mx = np.abs(pm.values).max()
    print(f"{model} nq={nq:2d} a={alpha:<6}: eps={eps:7.4f} gyres={g} max={mx:.3f}")
    return eps, g

print("--- alpha sweep at nq=10 ---")
for a in (0.05, 0.1, 0.125, 0.13, 0.15, 0.175, 0.2, 0.3):
    run("bv_alpha", 10, a)
print("--- bv at nq=20, 30 with plausible alphas ---")
for a in (0.1, 0.13, 0.15):
    run("bv_alpha", 20, a)
    run("bv_alpha", 30, a)
