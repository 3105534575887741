"""Command-line surface: simulation, extremals, reachable sets, certificates.

Exit codes: 0 success, 1 domain error (bad physics, unreachable target,
integration failure), 2 usage error.  All numeric output is deterministic
for a fixed invocation: seed grids, merge order and float formatting are
fixed, and worker threads (capped by QUBIT_REACH_THREADS) never reorder
results.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, svg, table as table_mod
from .bloch import SingularityError
from .extremals import hamiltonian, integrate_extremal, seed as seed_fn
from .ode import IntegrationError
from .params import SystemParams
from .reachset import (
    ReachSweep,
    barrier_certificate,
    guaranteed_ball_radius,
    lacuna_alpha_bound,
)
from .schedule import ControlSchedule, simulate
from .table import UnreachableError


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QUBIT_REACH_THREADS", "1")))
    except ValueError:
        return 1


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma-ratio", type=float, default=None,
                   help="scaled units: omega=1, 2*kappa=1, gamma=RATIO")
    p.add_argument("--omega", type=float, default=None, help="transition frequency (rad/s)")
    p.add_argument("--kappa", type=float, default=None, help="control coupling")
    p.add_argument("--gamma", type=float, default=None, help="decoherence rate (1/s)")


def _params(args, parser: argparse.ArgumentParser) -> SystemParams:
    physical = [args.omega, args.kappa, args.gamma]
    if args.gamma_ratio is not None:
        if any(v is not None for v in physical):
            parser.error("--gamma-ratio conflicts with --omega/--kappa/--gamma")
        return SystemParams.from_ratio(args.gamma_ratio)
    if all(v is not None for v in physical):
        return SystemParams(omega=args.omega, kappa=args.kappa, gamma=args.gamma)
    parser.error("give either --gamma-ratio or all of --omega --kappa --gamma")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w")


def _write_rows(out, header, rows):
    close = out is not sys.stdout
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) + "\n")
    if close:
        out.close()


# --- subcommands -----------------------------------------------------------


def _cmd_simulate(args, parser):
    params = _params(args, parser)
    r0 = np.array([float(v) for v in args.r0.split(",")])
    if r0.shape != (3,):
        parser.error("--r0 must be 'rx,ry,rz'")
    sched = ControlSchedule.from_csv(
        args.schedule, params=params, scaled=args.scaled, duration=args.T,
        u_max=args.u_max,
    )
    traj = simulate(r0, sched, params)
    ts = np.linspace(0.0, traj.final_time, args.samples)
    states = traj.sample(ts)
    rows = [(float(t), float(s[0]), float(s[1]), float(s[2])) for t, s in zip(ts, states)]
    _write_rows(_open_out(args.out), ["t", "rx", "ry", "rz"], rows)
    return 0


def _cmd_extremal(args, parser):
    params = _params(args, parser)
    sd = seed_fn(args.psi0, params, branch=args.branch)
    sample_dt = args.T / max(2, args.samples - 1)
    traj = integrate_extremal(sd, args.T, params, sample_dt=sample_dt)
    hs = hamiltonian(traj.ys, params)
    rows = [
        (float(t), float(y[0]), float(y[1]), float(y[2]), float(y[3]), float(y[4]), float(h))
        for t, y, h in zip(traj.ts, traj.ys, hs)
    ]
    _write_rows(_open_out(args.out), ["tau", "z", "R", "p", "q", "theta", "H"], rows)
    return 0


def _spiral_overlay(args, params):
    from .reachset import spiral_region

    return spiral_region(params) if getattr(args, "overlay_spiral", False) else None


def _cmd_reachset(args, parser):
    params = _params(args, parser)
    sweep = ReachSweep(
        params, args.T, n_seeds=args.seeds, raster=args.raster,
        n_threads=_threads(),
    )
    rset = sweep.reachable_set(args.T)
    if sweep.n_failed:
        print(f"note: {sweep.n_failed} seed(s) ended early and were truncated", file=sys.stderr)
    rows = [(float(z), float(r)) for z, r in rset.occupied_centers()]
    _write_rows(_open_out(args.out), ["z", "R"], rows)
    if args.svg:
        Path(args.svg).write_text(svg.reachset_figure(rset, _spiral_overlay(args, params)))
    if args.obj:
        from .reachset import revolve_to_3d, write_obj

        verts, faces = revolve_to_3d(rset, n_angles=args.obj_angles)
        write_obj(args.obj, verts, faces)
    return 0


def _cmd_movie(args, parser):
    params = _params(args, parser)
    sweep = ReachSweep(
        params, args.T_max, n_seeds=args.seeds, raster=args.raster,
        n_threads=_threads(),
    )
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    overlay = _spiral_overlay(args, params)
    for k in range(1, args.frames + 1):
        T = args.T_max * k / args.frames
        rset = sweep.reachable_set(T)
        frame = svg.reachset_figure(rset, overlay, label=f"wT = {T:.4f}")
        (outdir / f"frame_{k - 1:04d}.svg").write_text(frame)
    print(f"wrote {args.frames} frames to {outdir}")
    return 0


def _cmd_spiral(args, parser):
    from .reachset import spiral_region

    params = _params(args, parser)
    region = spiral_region(params)
    arcs = region.arcs(args.samples)
    rows = []
    for aid, arc in enumerate(arcs):
        for z, r in arc:
            rows.append((aid, float(z), float(r)))
    _write_rows(_open_out(args.out), ["arc", "z", "R"], rows)
    print(f"guaranteed ball radius = {guaranteed_ball_radius(params)!r}")
    if args.svg:
        Path(args.svg).write_text(svg.figure(spiral_arcs=arcs, title="spiral region"))
    return 0


def _cmd_lacuna(args, parser):
    params = _params(args, parser)
    radius = float(guaranteed_ball_radius(params))
    bound = float(lacuna_alpha_bound(params))
    delta = float(0.25 * np.pi * params.gamma / params.omega)
    print(f"guaranteed ball radius = {radius!r}")
    print(f"alpha bound = {bound!r}")
    print(f"delta = {delta!r}")
    if args.alpha is not None:
        beta = args.beta if args.beta is not None else 1e-3
        ok = barrier_certificate(args.phi0, args.alpha, beta, params)
        print(f"barrier certificate (phi0={args.phi0!r}, alpha={args.alpha!r}, "
              f"beta={beta!r}): {'PASS' if ok else 'FAIL'}")
    return 0


def _cmd_rank(args, parser):
    from .liealg import canonical_fields, rank_certificate

    params = _params(args, parser)
    fields = canonical_fields(params)
    axis = np.linspace(-1.0, 1.0, args.grid)
    rows = []
    for rx in axis:
        for ry in axis:
            for rz in axis:
                if rx * rx + ry * ry + rz * rz > 1.0 + 1e-12:
                    continue
                cert = rank_certificate(np.array([rx, ry, rz]), params, fields=fields)
                rows.append(
                    (float(rx), float(ry), float(rz), cert.rank,
                     "|".join(cert.witness), float(cert.determinant))
                )
    out = _open_out(args.out)
    close = out is not sys.stdout
    out.write("rx,ry,rz,rank,witness,det\n")
    for rx, ry, rz, rank, wit, det in rows:
        out.write(f"{rx!r},{ry!r},{rz!r},{rank},{wit},{det!r}\n")
    if close:
        out.close()
    return 0


def _cmd_table_build(args, parser):
    params = _params(args, parser)
    tbl = table_mod.build_table(
        params, n_seeds=args.seeds, T_max_scaled=args.T_max,
        grid_resolution=args.grid, n_threads=_threads(),
    )
    table_mod.save(tbl, args.out)
    print(f"wrote {int(np.sum(tbl.mask))} nonempty cells to {args.out}")
    return 0


def _cmd_table_query(args, parser):
    tbl = table_mod.load(getattr(args, "in"))
    psi0, theta0, tmin = table_mod.query(tbl, args.z, args.R)
    print(f"psi0={float(psi0)!r} theta0={float(theta0)!r} Tmin={float(tmin)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubit-reach",
        description="Dynamics, time-optimal controls and reachable sets of a "
                    "dissipative two-level system in the Bloch ball.",
    )
    parser.add_argument("--version", action="version", version=f"qubit-reach {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the Bloch equation under a u,n schedule")
    _add_param_flags(p)
    p.add_argument("--schedule", required=True, help="CSV with header t,u,n")
    p.add_argument("--r0", default="0,0,1", help="initial Bloch vector 'rx,ry,rz'")
    p.add_argument("--T", type=float, required=True, help="final time (physical units)")
    p.add_argument("--scaled", action="store_true", help="schedule times are in units of 1/omega")
    p.add_argument("--u-max", type=float, default=None, help="ingestion cap on |u|")
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("extremal", help="integrate one time-optimal extremal")
    _add_param_flags(p)
    p.add_argument("--psi0", type=float, required=True, help="costate angle (rad)")
    p.add_argument("--T", type=float, required=True, help="duration in units of 1/omega")
    p.add_argument("--branch", choices=("max", "min"), default="max")
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_extremal)

    p = sub.add_parser("reachset", help="reachable set raster at scaled time T")
    _add_param_flags(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--seeds", type=int, default=1024)
    p.add_argument("--raster", type=int, default=512)
    p.add_argument("--out", default="-", help="CSV of occupied cell centers")
    p.add_argument("--svg", default=None)
    p.add_argument("--obj", default=None, help="revolved 3D mesh (OBJ)")
    p.add_argument("--obj-angles", type=int, default=64)
    p.add_argument("--overlay-spiral", action="store_true")
    p.set_defaults(func=_cmd_reachset)

    p = sub.add_parser("movie", help="SVG frames of the growing reachable set")
    _add_param_flags(p)
    p.add_argument("--T-max", type=float, default=7.0)
    p.add_argument("--frames", type=int, default=140)
    p.add_argument("--seeds", type=int, default=1024)
    p.add_argument("--raster", type=int, default=512)
    p.add_argument("--out-dir", default="frames")
    p.add_argument("--overlay-spiral", action="store_true")
    p.set_defaults(func=_cmd_movie)

    p = sub.add_parser("spiral", help="spiral-bounded exactly-reachable region")
    _add_param_flags(p)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out", default="-")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=_cmd_spiral)

    p = sub.add_parser("lacuna", help="guaranteed-ball radius, alpha bound, delta, certificates")
    _add_param_flags(p)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=_cmd_lacuna)

    p = sub.add_parser("rank", help="bracket rank certificates on a Bloch-ball grid")
    _add_param_flags(p)
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("table", help="first-passage lookup table")
    tsub = p.add_subparsers(dest="table_command", required=True)
    pb = tsub.add_parser("build")
    _add_param_flags(pb)
    pb.add_argument("--seeds", type=int, default=4096)
    pb.add_argument("--T-max", type=float, default=10.0)
    pb.add_argument("--grid", type=int, default=256)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=_cmd_table_build)
    pq = tsub.add_parser("query")
    pq.add_argument("--in", required=True)
    pq.add_argument("--z", type=float, required=True)
    pq.add_argument("--R", type=float, required=True)
    pq.set_defaults(func=_cmd_table_query)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, SingularityError, IntegrationError, UnreachableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
