import sys, time
import numpy as np
from qgrom.fom import FomConfig, _FomDriver
from qgrom.field import Field
from qgrom.diagnostics import kinetic_energy

scheme = sys.argv[1]
t_end = float(sys.argv[2])
cfg = FomConfig(ro=0.0036, re=450, dt=1e-4, t0=10, t_end=t_end, nx=16, ny=32,
                snapshot_stride=1000, convection=scheme)
mesh = cfg.make_mesh()
drv = _FomDriver(cfg, mesh)
q = drv.y.copy(); psi = np.zeros(mesh.n_cells)
n_steps = cfg.n_steps()
qs, ps, ts, Es = [], [], [], []
t0 = time.perf_counter()
for n in range(1, n_steps + 1):
    q, psi = drv.advance(q, psi, n)
    if n % 1000 == 0:
        t = cfg.t0 + n * cfg.dt
        ts.append(t); qs.append(q.copy()); ps.append(psi.copy())
        Es.append(kinetic_energy(Field(mesh, psi), mesh))
wall = time.perf_counter() - t0
np.savez_compressed(f"_exp/long_{scheme}.npz", t=np.array(ts), E=np.array(Es),
                    q=np.array(qs), psi=np.array(ps), wall=wall)
print(f"{scheme}: wall {wall:.0f}s")
