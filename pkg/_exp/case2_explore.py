# find the laminar-to-turbulent transition time of case 2 on 32x64
import numpy as np
from qgrom.fom import FomConfig, _FomDriver
from qgrom.field import Field
from qgrom.diagnostics import kinetic_energy

cfg = FomConfig(ro=0.008, re=1000.0, dt=1e-4, t0=0.0, t_end=400.0, nx=32, ny=64,
                snapshot_stride=5000)
mesh = cfg.make_mesh()
drv = _FomDriver(cfg, mesh)
q = drv.y.copy(); psi = np.zeros(mesh.n_cells)
n_steps = cfg.n_steps()
v2 = None
for n in range(1, n_steps + 1):
    q, psi = drv.advance(q, psi, n)
    if n % 5000 == 0:
        t = n * cfg.dt
        E = kinetic_energy(Field(mesh, psi), mesh)
        # symmetry diagnostic: antisymmetric part remainder of psi about y=0
        p2 = psi.reshape(64, 32)
        sym_res = np.abs(p2 + p2[::-1, :]).max() / max(np.abs(psi).max(), 1e-30)
        print(f"t={t:7.1f}  E={E:14.2f}  asym={sym_res:9.2e}", flush=True)
        if n % 50000 == 0:
            np.save("_exp/case2_state_q.npy", q)
            np.save("_exp/case2_state_psi.npy", psi)
            np.save("_exp/case2_state_t.npy", np.array([t]))
