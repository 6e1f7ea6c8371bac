# case 2 with a tiny symmetry-breaking perturbation on the initial vorticity
import numpy as np
from qgrom.fom import FomConfig, _FomDriver
from qgrom.field import Field
from qgrom.diagnostics import kinetic_energy

cfg = FomConfig(ro=0.008, re=1000.0, dt=1e-4, t0=0.0, t_end=60.0, nx=32, ny=64,
                snapshot_stride=5000)
mesh = cfg.make_mesh()
drv = _FomDriver(cfg, mesh)
xs, ys = mesh.cell_centroids[:, 0], mesh.cell_centroids[:, 1]
q = drv.y + 1e-6 * np.sin(np.pi * xs) * np.cos(0.5 * np.pi * ys)
psi = np.zeros(mesh.n_cells)
for n in range(1, cfg.n_steps() + 1):
    q, psi = drv.advance(q, psi, n)
    if n % 5000 == 0:
        t = n * cfg.dt
        E = kinetic_energy(Field(mesh, psi), mesh)
        p2 = psi.reshape(64, 32)
        asym = np.abs(p2 + p2[::-1, :]).max() / max(np.abs(psi).max(), 1e-30)
        print(f"t={t:7.1f}  E={E:14.2f}  asym={asym:9.2e}", flush=True)
        if n % 50000 == 0:
            np.save("_exp/case2s_state_q.npy", q)
            np.save("_exp/case2s_state_psi.npy", psi)
