"""Command-line front end for the offline/online pipeline.

Subcommands: ``fom`` (full-order run), ``pod`` (basis extraction), ``rom``
(single online run), ``bench`` (full benchmark protocol for a preset case),
``diag`` (compare two time-averaged stream-function dumps).

Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 IO failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .bench import CASES, run_fom_with_spinup, run_case
from .diagnostics import gyre_count, relative_error
from .field import Field, coordinate_field_y, forcing_field
from .fom import FomConfig
from .linsolve import ConvergenceError
from .mesh import build_mesh
from .pod import PodBasis, build_basis, compute_lifting, correlation_matrix, \
    eigendecompose, select_modes
from .rom import RomConfig, assemble_reduced_operators, project_initial, run_rom
from .store import StoreFormatError, read_field_dump, read_snapshots, \
    write_csv, write_field_dump, write_snapshots

CONFIG_KEYS = {
    "ro": float, "re": float, "nx": int, "ny": int,
    "x_min": float, "x_max": float, "y_min": float, "y_max": float,
    "dt": float, "t0": float, "t_end": float, "stride": int,
    "spin_up": float, "eps_psi": float, "nq": str, "alpha": float,
    "model": str, "tol_spd": float, "tol_gen": float,
    "convection": str, "forcing": str, "out_dir": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def parse_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _fom_config(cv: dict) -> FomConfig:
    required = ("ro", "re", "nx", "ny", "dt", "t0", "t_end")
    missing = [k for k in required if k not in cv]
    if missing:
        raise UsageError(f"config is missing keys: {', '.join(missing)}")
    bounds = (cv.get("x_min", 0.0), cv.get("x_max", 1.0),
              cv.get("y_min", -1.0), cv.get("y_max", 1.0))
    return FomConfig(ro=cv["ro"], re=cv["re"], dt=cv["dt"], t0=cv["t0"],
                     t_end=cv["t_end"], nx=cv["nx"], ny=cv["ny"], bounds=bounds,
                     snapshot_stride=cv.get("stride", 1),
                     tol_spd=cv.get("tol_spd", 1e-8),
                     tol_gen=cv.get("tol_gen", 1e-8),
                     convection=cv.get("convection", "linear"),
                     forcing=cv.get("forcing", "double_gyre"))


def _cmd_fom(args) -> int:
    cv = parse_config(args.config)
    cfg = _fom_config(cv)
    out = Path(args.out_dir or cv.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    snaps_q, snaps_psi, energy, _, wall = run_fom_with_spinup(
        cfg, cv.get("spin_up", 0.0))
    write_snapshots(snaps_q, out / "snapshots_q.bin")
    write_snapshots(snaps_psi, out / "snapshots_psi.bin")
    write_csv(out / "energy.csv", ["time", "E"], energy.entries)
    print(f"wrote {len(snaps_q)} snapshots to {out} (wall {wall:.1f}s)")
    return 0


def _cmd_pod(args) -> int:
    bounds = (args.x_min, args.x_max, args.y_min, args.y_max)
    snaps_q = read_snapshots(args.q, bounds=bounds)
    snaps_psi = read_snapshots(args.psi, bounds=bounds)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lifting, snaps_q_h = compute_lifting(snaps_q)
    lam_q, vec_q = eigendecompose(correlation_matrix(snaps_q_h))
    lam_psi, vec_psi = eigendecompose(correlation_matrix(snaps_psi))
    n_psi = select_modes(lam_psi, args.eps_psi)
    n_q = max(int(v) for v in args.nq.split(","))
    basis_q = build_basis(snaps_q_h, vec_q, lam_q, n_q)
    basis_psi = build_basis(snaps_psi, vec_psi, lam_psi, n_psi)

    for lam, name in ((lam_q, "eigenvalues_q.csv"), (lam_psi, "eigenvalues_psi.csv")):
        cum = np.cumsum(lam) / lam.sum()
        write_csv(out / name, ["index", "lambda", "cumulative"],
                  [(i + 1, lam[i], cum[i]) for i in range(lam.size)])
    for basis, name in ((basis_q, "modes_q.bin"), (basis_psi, "modes_psi.bin")):
        times = np.arange(1.0, basis.retained + 1)
        modes = dataclasses.replace(snaps_q, times=times, fields=basis.modes,
                                    tag="mode", lifting=basis.lifting)
        write_snapshots(modes, out / name)
    print(f"wrote bases to {out} (n_q={n_q}, n_psi={n_psi})")
    return 0


def _cmd_rom(args) -> int:
    bounds = (args.x_min, args.x_max, args.y_min, args.y_max)
    modes_q = read_snapshots(args.modes_q, bounds=bounds)
    modes_psi = read_snapshots(args.modes_psi, bounds=bounds, mesh=modes_q.mesh)
    if modes_q.lifting is None:
        raise StoreFormatError("vorticity mode store carries no lifting field")
    n_q, n_psi = args.nq, args.npsi
    if n_q > len(modes_q) or n_psi > len(modes_psi):
        raise UsageError("requested more modes than stored")
    basis_q = PodBasis(modes=modes_q.fields[:n_q], eigenvalues=np.ones(n_q),
                       retained=n_q, tag="q", lifting=modes_q.lifting)
    basis_psi = PodBasis(modes=modes_psi.fields[:n_psi], eigenvalues=np.ones(n_psi),
                         retained=n_psi, tag="psi", lifting=None)
    mesh = modes_q.mesh
    model = {"qge": "qge_qge", "bv-alpha": "bv_alpha"}[args.model]
    cfg = RomConfig(model=model, dt=args.dt, t0=args.t0, t_end=args.t_end,
                    ro=args.ro, re=args.re, n_q=n_q, n_psi=n_psi,
                    alpha=args.alpha, record_stride=args.stride)
    ops = assemble_reduced_operators(basis_q, basis_psi, mesh, forcing_field(mesh),
                                     convection_scheme=args.convection)
    init = project_initial(coordinate_field_y(mesh), Field(mesh, np.zeros(mesh.n_cells)),
                           basis_q, basis_psi, t0=args.t0)
    traj, energy, online = run_rom(init, ops, cfg)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["time"] + [f"beta_{i+1}" for i in range(n_q)] \
        + [f"gamma_{i+1}" for i in range(n_psi)]
    rows = [[t, *b, *g] for t, b, g in zip(traj.times, traj.beta, traj.gamma)]
    write_csv(out / "coefficients.csv", header, rows)
    write_csv(out / "rom_energy.csv", ["time", "E"], energy.entries)
    psi_mean = Field(mesh, basis_psi.mode_matrix() @ traj.mean_gamma())
    write_field_dump(psi_mean, out / "psi_mean_rom.csv")
    print(f"online phase took {online:.2f}s; wrote traces to {out}")
    return 0


def _cmd_bench(args) -> int:
    case = CASES.get(args.case)
    if case is None:
        raise UsageError(f"unknown case {args.case!r}; pick one of 1, 2")
    if args.alpha_candidates:
        cand = tuple(float(v) for v in args.alpha_candidates.split(","))
        case = dataclasses.replace(case, alpha_candidates=cand)
    out = Path(args.out_dir or f"bench_{case.label}")
    run_case(case, out)
    print(f"report written to {out / 'report.csv'}")
    return 0


def _cmd_diag(args) -> int:
    mesh = build_mesh(args.nx, args.ny, (args.x_min, args.x_max, args.y_min, args.y_max))
    fa = read_field_dump(args.psi_mean_a, mesh)
    fb = read_field_dump(args.psi_mean_b, mesh)
    eps = relative_error(fa, fb)
    print(f"epsilon = {eps:.6e}")
    print(f"gyres(a) = {gyre_count(fa, mesh)}")
    print(f"gyres(b) = {gyre_count(fb, mesh)}")
    return 0


def _add_domain_args(p):
    p.add_argument("--x-min", type=float, default=0.0)
    p.add_argument("--x-max", type=float, default=1.0)
    p.add_argument("--y-min", type=float, default=-1.0)
    p.add_argument("--y-max", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qgrom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fom", help="run the full-order model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_fom)

    p = sub.add_parser("pod", help="extract POD bases from snapshot stores")
    p.add_argument("--q", required=True, help="q snapshot store")
    p.add_argument("--psi", required=True, help="psi snapshot store")
    p.add_argument("--eps-psi", type=float, default=0.98)
    p.add_argument("--nq", default="30", help="comma list; the max is built")
    p.add_argument("--out-dir", default=".")
    _add_domain_args(p)
    p.set_defaults(func=_cmd_pod)

    p = sub.add_parser("rom", help="assemble operators and run one online phase")
    p.add_argument("--model", choices=("qge", "bv-alpha"), required=True)
    p.add_argument("--modes-q", required=True)
    p.add_argument("--modes-psi", required=True)
    p.add_argument("--nq", type=int, required=True)
    p.add_argument("--npsi", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--ro", type=float, required=True)
    p.add_argument("--re", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t0", type=float, default=10.0)
    p.add_argument("--t-end", type=float, default=80.0)
    p.add_argument("--stride", type=int, default=1000)
    p.add_argument("--convection", choices=("linear", "upwind"), default="linear")
    p.add_argument("--out-dir", default=".")
    _add_domain_args(p)
    p.set_defaults(func=_cmd_rom)

    p = sub.add_parser("bench", help="run the full benchmark protocol for a preset")
    p.add_argument("--case", required=True, help="1 or 2")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--alpha-candidates", default=None,
                   help="override the filter-radius sweep (comma list)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("diag", help="compare two psi_mean field dumps")
    p.add_argument("--psi-mean-a", required=True)
    p.add_argument("--psi-mean-b", required=True)
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    _add_domain_args(p)
    p.set_defaults(func=_cmd_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (StoreFormatError, OSError) as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ConvergenceError, FloatingPointError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
