import sys, time
import numpy as np
from qgrom.mesh import build_mesh
from qgrom.field import Field, forcing_field
from qgrom.pod import SnapshotSet, compute_lifting, correlation_matrix, eigendecompose, build_basis, select_modes
from qgrom.rom import RomConfig, RomState, assemble_reduced_operators, project_initial, run_rom, reconstruct
from qgrom.diagnostics import relative_error, gyre_count, time_average

mesh = build_mesh(16, 32, (0, 1, -1, 1))
d = np.load("_exp/long_linear.npz")
t = d["t"]
lo, hi = 20.0, 90.0
m = (t > lo) & (t <= hi)
times = t[m]
snap_q = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["q"][m]], tag="q")
snap_p = SnapshotSet(mesh=mesh, times=times, fields=[Field(mesh, v) for v in d["psi"][m]], tag="psi")

lift, snap_qh = compute_lifting(snap_q)
lam_q, vec_q = eigendecompose(correlation_matrix(snap_qh))
lam_p, vec_p = eigendecompose(correlation_matrix(snap_p))
n_psi = select_modes(lam_p, 0.98)
print("n_psi(98%) =", n_psi)
basis_q = build_basis(snap_qh, vec_q, lam_q, 40)
basis_psi = build_basis(snap_p, vec_p, lam_p, n_psi)

ops_full = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh), "linear")
print("M_r - I max:", np.abs(ops_full.mass - np.eye(40)).max())

# initial state: FOM state at t = 20.0 (start of window)
i0 = int(np.argmin(np.abs(t - 20.0)))
assert abs(t[i0] - 20.0) < 1e-9
q0 = Field(mesh, d["q"][i0]); p0 = Field(mesh, d["psi"][i0])
init_full = project_initial(q0, p0, basis_q, basis_psi, t0=10.0)

psi_mean_fom = time_average(snap_p.fields)
xi = basis_psi.mode_matrix()

import dataclasses
def run(model, nq, alpha=0.0):
    ops = ops_full.truncate(nq, n_psi)
    init = dataclasses.replace(init_full, beta=init_full.beta[:nq],
                               beta_bar=init_full.beta_bar[:nq], gamma=init_full.gamma[:n_psi])
    cfg = RomConfig(model=model, dt=1e-4, t0=10.0, t_end=80.0, ro=0.0036, re=450.0,
                    n_q=nq, n_psi=n_psi, alpha=alpha, record_stride=1000)
    tic = time.perf_counter()
    try:
        traj, etrace, online = run_rom(init, ops, cfg)
    except FloatingPointError as e:
        print(f"{model} nq={nq} alpha={alpha}: DIVERGED ({e})")
        return
    pm = Field(mesh, xi @ traj.mean_gamma())
    eps = relative_error(psi_mean_fom, pm)
    g = gyre_count(pm, mesh)
    print(f"{model} nq={nq} alpha={alpha}: eps={eps:.4g} gyres={g} online={online:.1f}s "
          f"E_rom_mean={np.mean([e for _, e in etrace.entries]):.1f}")

for nq in (10, 20, 30, 40):
    run("qge_qge", nq)
run("bv_alpha", 10, 0.13)
