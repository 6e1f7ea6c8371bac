"""Benchmark presets and the end-to-end offline/online protocol.

Two double-gyre cases share the same Munk scale: a small-Rossby one on a
16x32 grid and a higher-Reynolds one on 32x64. The driver runs the
full-order model, extracts both POD bases, runs the plain and the
filter-regularized reduced models over a range of vorticity mode counts,
calibrates the filter radius by sweeping candidates, and writes a report
plus the raw traces.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import gyre_count, relative_error, time_average
from .field import Field, coordinate_field_y, forcing_field
from .fom import FomConfig, FomState, run_fom
from .pod import build_basis, compute_lifting, correlation_matrix, \
    eigendecompose, select_modes
from .rom import RomConfig, assemble_reduced_operators, calibrate_alpha, \
    project_initial, run_rom
from .store import write_csv, write_field_dump, write_snapshots


@dataclass(frozen=True)
class BenchCase:
    """Immutable benchmark preset."""

    label: str
    ro: float
    re: float
    nx: int
    ny: int
    dt: float = 1e-4
    t0: float = 10.0
    t_end: float = 80.0
    snapshot_stride: int = 1000
    spin_up: float = 10.0
    eps_psi: float = 0.98
    nq_list: tuple[int, ...] = (10, 20, 30)
    nq_extra_qge: tuple[int, ...] = (40,)
    alpha_candidates: tuple[float, ...] = (0.05, 0.1, 0.125, 0.13, 0.15, 0.175, 0.2, 0.3)
    convection: str = "linear"

    def fom_config(self) -> FomConfig:
        return FomConfig(ro=self.ro, re=self.re, dt=self.dt, t0=self.t0,
                         t_end=self.t_end, nx=self.nx, ny=self.ny,
                         snapshot_stride=self.snapshot_stride,
                         convection=self.convection)

    def signature(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


CASE1 = BenchCase(label="case1", ro=0.0036, re=450.0, nx=16, ny=32)
CASE2 = BenchCase(label="case2", ro=0.008, re=1000.0, nx=32, ny=64)
CASES = {"1": CASE1, "2": CASE2, "case1": CASE1, "case2": CASE2}

REPORT_HEADER = ["model", "n_q", "energy_fraction_q", "epsilon", "gyre_count",
                 "online_seconds", "fom_seconds", "speedup"]


def run_fom_with_spinup(cfg: FomConfig, spin_up: float):
    """Run the FOM, optionally preceded by an unrecorded spin-up phase.

    The cold start q = y is applied ``spin_up`` time units before the
    sampling window; snapshots cover (t0, t_end] either way. Returns
    (q snapshots, psi snapshots, energy trace, state at t0, wall seconds).
    """
    tic = time.perf_counter()
    state0 = None
    if spin_up > 0.0:
        spin_cfg = dataclasses.replace(cfg, t0=cfg.t0 - spin_up, t_end=cfg.t0,
                                       snapshot_stride=1)
        spin_cfg = dataclasses.replace(spin_cfg, snapshot_stride=spin_cfg.n_steps())
        sq, sp, _ = run_fom(spin_cfg)
        state0 = FomState(q=sq.fields[-1], psi=sp.fields[-1], time=cfg.t0)
    snaps_q, snaps_psi, energy = run_fom(cfg, initial_state=state0)
    wall = time.perf_counter() - tic
    if state0 is None:
        mesh = snaps_q.mesh
        state0 = FomState(q=coordinate_field_y(mesh),
                          psi=Field(mesh, np.zeros(mesh.n_cells)), time=cfg.t0)
    return snaps_q, snaps_psi, energy, state0, wall


@dataclass
class BenchResult:
    label: str
    fom_seconds: float
    pod_seconds: float
    n_psi: int
    eigvals_q: np.ndarray
    eigvals_psi: np.ndarray
    alpha_by_nq: dict[int, float]
    alpha_records: dict[int, list[dict]]
    gyre_fom: int
    rows: list[dict]

    @property
    def alpha_star(self) -> float:
        """Calibrated filter radius at the smallest preset mode count."""
        return self.alpha_by_nq[min(self.alpha_by_nq)]

    def row(self, model: str, n_q: int) -> dict:
        for r in self.rows:
            if r["model"] == model and r["n_q"] == n_q:
                return r
        raise KeyError(f"no report row for ({model}, {n_q})")

    def energy_fraction_q(self, n_q: int) -> float:
        lam = self.eigvals_q
        return float(lam[:n_q].sum() / lam.sum())

    def energy_fraction_psi(self, n: int) -> float:
        lam = self.eigvals_psi
        return float(lam[:n].sum() / lam.sum())


def _spectrum_rows(lam: np.ndarray):
    cum = np.cumsum(lam) / lam.sum()
    return [(i + 1, lam[i], cum[i]) for i in range(lam.size)]


def run_case(case: BenchCase, out_dir, progress=print) -> BenchResult:
    """Execute the full offline/online protocol for one preset."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = case.fom_config()
    mesh = cfg.make_mesh()
    forcing = forcing_field(mesh)

    progress(f"[{case.label}] full-order run ({cfg.n_steps()} steps)")
    snaps_q, snaps_psi, energy, state0, fom_seconds = run_fom_with_spinup(
        cfg, case.spin_up)
    progress(f"[{case.label}] FOM finished in {fom_seconds:.1f}s")
    write_csv(out / "energy.csv", ["time", "E"], energy.entries)
    write_snapshots(snaps_psi, out / "snapshots_psi.bin")
    write_snapshots(snaps_q, out / "snapshots_q.bin")
    psi_mean_fom = time_average(snaps_psi.fields)
    write_field_dump(psi_mean_fom, out / "psi_mean_fom.csv")
    gyre_fom = gyre_count(psi_mean_fom, mesh)

    tic = time.perf_counter()
    lifting, snaps_q_h = compute_lifting(snaps_q)
    lam_q, vec_q = eigendecompose(correlation_matrix(snaps_q_h))
    lam_psi, vec_psi = eigendecompose(correlation_matrix(snaps_psi))
    n_psi = select_modes(lam_psi, case.eps_psi)
    n_q_max = max(case.nq_list + case.nq_extra_qge)
    basis_q = build_basis(snaps_q_h, vec_q, lam_q, n_q_max)
    basis_psi = build_basis(snaps_psi, vec_psi, lam_psi, n_psi)
    pod_seconds = time.perf_counter() - tic
    progress(f"[{case.label}] POD finished in {pod_seconds:.1f}s "
             f"(n_psi={n_psi} at {case.eps_psi:.0%})")
    write_csv(out / "eigenvalues_q.csv", ["index", "lambda", "cumulative"],
              _spectrum_rows(lam_q))
    write_csv(out / "eigenvalues_psi.csv", ["index", "lambda", "cumulative"],
              _spectrum_rows(lam_psi))

    ops_full = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing,
                                          convection_scheme=case.convection)
    init_full = project_initial(state0.q, state0.psi, basis_q, basis_psi,
                                t0=cfg.t0)

    def make_run(n_q: int, model: str, alpha: float = 0.0):
        ops = ops_full.truncate(n_q, n_psi)
        init = dataclasses.replace(
            init_full, beta=init_full.beta[:n_q],
            beta_bar=init_full.beta_bar[:n_q], gamma=init_full.gamma[:n_psi])
        rom_cfg = RomConfig(model=model, dt=cfg.dt, t0=cfg.t0, t_end=cfg.t_end,
                            ro=cfg.ro, re=cfg.re, n_q=n_q, n_psi=n_psi,
                            alpha=alpha, record_stride=case.snapshot_stride)
        return ops, init, rom_cfg

    # the filter radius is tuned by error minimization per mode count
    alpha_by_nq: dict[int, float] = {}
    alpha_records: dict[int, list[dict]] = {}
    for n_q in case.nq_list:
        ops, init, rom_cfg = make_run(n_q, "bv_alpha")
        calib = calibrate_alpha(list(case.alpha_candidates), ops, init, rom_cfg,
                                basis_psi, psi_mean_fom)
        alpha_by_nq[n_q] = calib.alpha
        alpha_records[n_q] = calib.records
        progress(f"[{case.label}] calibrated filter radius alpha={calib.alpha:g} "
                 f"for n_q={n_q}")
        write_csv(out / f"alpha_sweep_nq{n_q}.csv", ["alpha", "epsilon", "status"],
                  [(r["alpha"], r["epsilon"], r["status"]) for r in calib.records])

    xi = basis_psi.mode_matrix()
    rows = []
    runs = [("qge_qge", n) for n in (*case.nq_list, *case.nq_extra_qge)] \
        + [("bv_alpha", n) for n in case.nq_list]
    for model, n_q in runs:
        alpha = alpha_by_nq[n_q] if model == "bv_alpha" else 0.0
        ops, init, rom_cfg = make_run(n_q, model, alpha)
        try:
            traj, rom_energy, online_seconds = run_rom(init, ops, rom_cfg)
            psi_mean_rom = Field(mesh, xi @ traj.mean_gamma())
            eps = relative_error(psi_mean_fom, psi_mean_rom)
            gyres = gyre_count(psi_mean_rom, mesh)
            tag = f"{model}_nq{n_q}"
            write_csv(out / f"rom_energy_{tag}.csv", ["time", "E"], rom_energy.entries)
            write_field_dump(psi_mean_rom, out / f"psi_mean_{tag}.csv")
        except (FloatingPointError, RuntimeError) as exc:
            progress(f"[{case.label}] {model} n_q={n_q} diverged: {exc}")
            eps, gyres, online_seconds = float("nan"), 0, float("nan")
        rows.append({
            "model": model, "n_q": n_q,
            "energy_fraction_q": float(lam_q[:n_q].sum() / lam_q.sum()),
            "epsilon": eps, "gyre_count": gyres,
            "online_seconds": online_seconds, "fom_seconds": fom_seconds,
            "speedup": fom_seconds / online_seconds if online_seconds else float("nan"),
        })
        progress(f"[{case.label}] {model} n_q={n_q}: eps={eps:.3g} gyres={gyres} "
                 f"online={online_seconds:.1f}s")

    write_csv(out / "report.csv", REPORT_HEADER,
              [[r[k] for k in REPORT_HEADER] for r in rows])

    result = BenchResult(label=case.label, fom_seconds=fom_seconds,
                         pod_seconds=pod_seconds, n_psi=n_psi,
                         eigvals_q=lam_q, eigvals_psi=lam_psi,
                         alpha_by_nq=alpha_by_nq, alpha_records=alpha_records,
                         gyre_fom=gyre_fom, rows=rows)
    _write_summary(result, case, out / "summary.json")
    return result


def _write_summary(result: BenchResult, case: BenchCase, path) -> None:
    payload = {
        "label": result.label,
        "signature": case.signature(),
        "fom_seconds": result.fom_seconds,
        "pod_seconds": result.pod_seconds,
        "n_psi": result.n_psi,
        "eigvals_q": result.eigvals_q.tolist(),
        "eigvals_psi": result.eigvals_psi.tolist(),
        "alpha_by_nq": {str(k): v for k, v in result.alpha_by_nq.items()},
        "alpha_records": {str(k): v for k, v in result.alpha_records.items()},
        "gyre_fom": result.gyre_fom,
        "rows": result.rows,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_summary(path) -> BenchResult:
    with open(path) as fh:
        p = json.load(fh)
    return BenchResult(label=p["label"], fom_seconds=p["fom_seconds"],
                       pod_seconds=p["pod_seconds"], n_psi=p["n_psi"],
                       eigvals_q=np.array(p["eigvals_q"]),
                       eigvals_psi=np.array(p["eigvals_psi"]),
                       alpha_by_nq={int(k): v for k, v in p["alpha_by_nq"].items()},
                       alpha_records={int(k): v for k, v in p["alpha_records"].items()},
                       gyre_fom=p["gyre_fom"], rows=p["rows"])


def load_or_run_case(case: BenchCase, out_dir, progress=print,
                     force: bool = False) -> BenchResult:
    """Reuse a cached benchmark summary when its preset signature matches."""
    summary = Path(out_dir) / "summary.json"
    if not force and summary.exists():
        try:
            with open(summary) as fh:
                if json.load(fh).get("signature") == case.signature():
                    progress(f"[{case.label}] using cached results in {out_dir}")
                    return load_summary(summary)
        except (json.JSONDecodeError, KeyError):
            pass
    return run_case(case, out_dir, progress=progress)
