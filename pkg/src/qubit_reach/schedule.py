"""Piecewise-constant control schedules and closed-loop simulation.

Controls are ingested as sample-and-hold schedules: the pair (u_i, n_i)
applies on [t_i, t_{i+1}) and the last pair holds until the final time T.
CSV format: header ``t,u,n``, one row per breakpoint, times ascending from
zero.  With ``scaled=True`` the file's times are in units of 1/omega.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .bloch import bloch_rhs
from .ode import IntegratorConfig, Trajectory, integrate
from .params import SystemParams


@dataclass
class ControlSchedule:
    """Piecewise-constant (u, n) on a strictly increasing time grid."""

    times: np.ndarray
    u: np.ndarray
    n: np.ndarray
    T: float = field(default=0.0)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.n = np.asarray(self.n, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("schedule needs at least one breakpoint")
        if len(self.u) != len(self.times) or len(self.n) != len(self.times):
            raise ValueError("times, u and n must have equal length")
        if self.times[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("schedule times must be strictly increasing")
        if np.any(self.n < 0):
            raise ValueError("incoherent control must be non-negative")
        if self.T == 0.0:
            self.T = float(self.times[-1])
        if self.T <= 0:
            raise ValueError("final time must be positive")

    def value(self, t: float) -> tuple[float, float]:
        """Sample-and-hold lookup of (u, n) at time t."""
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        return float(self.u[i]), float(self.n[i])

    def clipped(self, u_max: float) -> "ControlSchedule":
        return ControlSchedule(self.times, np.clip(self.u, -u_max, u_max), self.n, self.T)

    @classmethod
    def from_csv(
        cls,
        path,
        params: SystemParams | None = None,
        scaled: bool = False,
        duration: float | None = None,
        u_max: float | None = None,
    ) -> "ControlSchedule":
        """Read a t,u,n schedule; header row is required.

        The ingestion cap on |u| defaults to params.u_max_default when
        params are given; pass u_max=np.inf to disable it.
        """
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header[:3]] != ["t", "u", "n"]:
                raise ValueError(f"{path}: expected header 't,u,n'")
            for row in reader:
                if not row or not "".join(row).strip():
                    continue
                rows.append([float(v) for v in row[:3]])
        if not rows:
            raise ValueError(f"{path}: schedule has no rows")
        data = np.array(rows, dtype=float)
        times = data[:, 0]
        if scaled:
            if params is None:
                raise ValueError("scaled times require system parameters")
            times = times / params.omega
        sched = cls(times, data[:, 1], data[:, 2], T=duration or 0.0)
        cap = u_max if u_max is not None else (params.u_max_default if params else None)
        return sched.clipped(cap) if cap is not None and np.isfinite(cap) else sched

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u", "n"])
            for t, u, n in zip(self.times, self.u, self.n):
                writer.writerow([repr(float(t)), repr(float(u)), repr(float(n))])


def concat_schedules(first: ControlSchedule, second: ControlSchedule) -> ControlSchedule:
    """Play ``first`` on [0, first.T], then ``second`` shifted to start there."""
    times = np.concatenate([first.times, first.T + second.times])
    u = np.concatenate([first.u, second.u])
    n = np.concatenate([first.n, second.n])
    return ControlSchedule(times, u, n, T=first.T + second.T)


def simulate(r0, schedule: ControlSchedule, params: SystemParams, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the Bloch equation under a piecewise-constant schedule.

    Each constant-control segment is integrated separately so the solver
    never steps across a control discontinuity.  Dense schedules (many
    segments) are integrated with one RK4 node per sufficiently short
    segment, which keeps the cost linear in the number of breakpoints.
    """
    r0 = np.asarray(r0, dtype=float)
    cfg = cfg or IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10)
    edges = np.concatenate([schedule.times[schedule.times < schedule.T], [schedule.T]])
    ts_out = [np.array([0.0])]
    ys_out = [r0[None, :]]
    y = r0
    for i in range(len(edges) - 1):
        t0, t1 = edges[i], edges[i + 1]
        u, n = schedule.value(t0)
        seg_rhs = lambda t, r, u=u, n=n: bloch_rhs(r, u, n, params)
        span = t1 - t0
        if span <= 0:
            continue
        seg_cfg = cfg
        if cfg.method == "rk45" and len(edges) > 256:
            # many short segments: fixed RK4 substeps are cheaper and accurate
            seg_cfg = IntegratorConfig(method="rk4", step=span / max(1, int(np.ceil(span * params.omega / 0.05))))
        traj = integrate(seg_rhs, y, span, seg_cfg)
        y = traj.final_state
        ts_out.append(t0 + traj.ts[1:])
        ys_out.append(traj.ys[1:])
    ts = np.concatenate(ts_out)
    ys = np.concatenate(ys_out)
    fs = np.empty_like(ys)
    for i, t in enumerate(ts):
        u, n = schedule.value(min(t, schedule.T * (1 - 1e-15)))
        fs[i] = bloch_rhs(ys[i], u, n, params)
    return Trajectory(ts, ys, fs)
