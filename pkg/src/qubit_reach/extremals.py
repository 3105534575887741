"""Time-optimal extremals of the meridian-plane system.

Working picture
---------------
Time is rescaled as tau = omega * t and g = gamma / omega.  The phase
point is ``(z, R, p, q, theta)``: meridian coordinates ``(z, R)``, their
conjugate variables ``(p, q)``, and the control angle ``theta`` held at
the pointwise maximizer of the control Hamiltonian

    H = -p (g z / 2 + R cos th)
        + q (z cos th - g R (3 - cos 2th) / 4 + g sin th).

Because the admissible-velocity curve is strictly convex for 0 < R < 1
(see :func:`convexity_margin`), the maximizer is a smooth implicit
function of the state and its drift follows from d/dtau (dH/dtheta) = 0:

    theta' = (g/8) [ (pR + qz)(5 sin th + sin 3th) - 8 p
                     - 4 g q cos^3 th ]
             / [ (pR - qz) cos th - g q (sin th + R cos 2th) ].

The closed form was re-derived by expanding the stationarity condition
along the state and costate equations; it matches term by term, with
``g sin th`` (not ``gamma sin th``) in the R equation, which is the only
reading consistent with the time rescaling.

Extremals are integrated in the covering space where R may change sign;
``(R, q, theta) -> (-R, -q, theta + pi)`` is an exact symmetry of the
flow, and :func:`integrate_extremal` folds stored samples back to
R >= 0.  All stationarity and control-recovery formulas used here are
invariant under that fold.

State arrays use a trailing axis of length 5 in the public functions,
matching ``Trajectory.ys`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import SingularityError
from .ode import IntegrationError, IntegratorConfig, Trajectory, dp45_step
from .params import SystemParams
from .schedule import ControlSchedule


def _unpack(state):
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != 5:
        raise ValueError(f"extremal state needs a trailing axis of length 5, got {state.shape}")
    return np.moveaxis(state, -1, 0)


def hamiltonian(state, params: SystemParams):
    z, R, p, q, th = _unpack(state)
    g = params.ratio
    ct = np.cos(th)
    return -p * (0.5 * g * z + R * ct) + q * (
        z * ct - 0.25 * g * R * (3.0 - np.cos(2.0 * th)) + g * np.sin(th)
    )


def hamiltonian_dtheta(state, params: SystemParams):
    """dH/dtheta; zero along extremals (stationarity residual)."""
    z, R, p, q, th = _unpack(state)
    g = params.ratio
    return (p * R - q * z) * np.sin(th) + g * q * (np.cos(th) - 0.5 * R * np.sin(2.0 * th))


def hamiltonian_dtheta2(state, params: SystemParams):
    """d^2H/dtheta^2; also the denominator of the theta drift."""
    z, R, p, q, th = _unpack(state)
    g = params.ratio
    return (p * R - q * z) * np.cos(th) - g * q * (np.sin(th) + R * np.cos(2.0 * th))


def aux_rhs_scaled(z, R, theta, params: SystemParams):
    """Meridian system in rescaled time tau = omega t."""
    g = params.ratio
    ct = np.cos(theta)
    zp = -0.5 * g * z - R * ct
    rp = z * ct - 0.25 * g * R * (3.0 - np.cos(2.0 * theta)) + g * np.sin(theta)
    return zp, rp


def costate_rhs(state, params: SystemParams):
    """(p', q') = (-dH/dz, -dH/dR) in rescaled time."""
    z, R, p, q, th = _unpack(state)
    g = params.ratio
    ct = np.cos(th)
    pp = 0.5 * g * p - q * ct
    qp = p * ct + 0.25 * g * q * (3.0 - np.cos(2.0 * th))
    return np.stack([pp, qp], axis=-1)


def theta_rhs(state, params: SystemParams, den_tol: float = 1e-10):
    """Drift of the maximizing control angle in rescaled time.

    Raises :class:`SingularityError` when the strict-convexity
    denominator degenerates (argmax branch jump).
    """
    z, R, p, q, th = _unpack(state)
    g = params.ratio
    st, ct = np.sin(th), np.cos(th)
    num = 0.125 * g * (
        (p * R + q * z) * (5.0 * st + np.sin(3.0 * th)) - 8.0 * p - 4.0 * g * q * ct ** 3
    )
    den = (p * R - q * z) * ct - g * q * (st + R * np.cos(2.0 * th))
    if np.any(np.abs(den) < den_tol):
        raise SingularityError("theta dynamics degenerate: |d2H/dtheta2| below tolerance")
    return num / den


def convexity_margin(z, R, theta, params: SystemParams):
    """Curvature signature g R (R sin^3(theta) - 1) of the velocity curve.

    Strictly negative for 0 < R < 1, which makes the Hamiltonian
    maximizer unique and smooth there; it vanishes at R = 0 and at the
    boundary point R = 1, sin(theta) = 1.  Independent of z.
    """
    del z
    R = np.asarray(R, dtype=float)
    return params.ratio * R * (R * np.sin(theta) ** 3 - 1.0)


# --- seeding --------------------------------------------------------------


@dataclass(frozen=True)
class ExtremalSeed:
    """Initial data of one extremal from the attracting circle (z, R) = (0, 1).

    psi0 parametrizes the costate, (p, q)(0) = (cos psi0, sin psi0);
    theta0 is the stationary angle selected on the requested branch.
    """

    psi0: float
    theta0: float
    branch: str = "max"

    @property
    def state0(self) -> np.ndarray:
        return np.array([0.0, 1.0, np.cos(self.psi0), np.sin(self.psi0), self.theta0])


def _seed_residual(theta, psi0, g):
    return np.cos(psi0) * np.sin(theta) - g * np.sin(psi0) * np.cos(theta) * (np.sin(theta) - 1.0)


def _seed_residual_prime(theta, psi0, g):
    st, ct = np.sin(theta), np.cos(theta)
    return np.cos(psi0) * ct + g * np.sin(psi0) * (st * (st - 1.0) - ct * ct)


def _hamiltonian_at_start(theta, psi0, g):
    # H at (z, R) = (0, 1): -cos(psi0) cos(th) - (g/2) sin(psi0) (sin(th)-1)^2
    return -np.cos(psi0) * np.cos(theta) - 0.5 * g * np.sin(psi0) * (np.sin(theta) - 1.0) ** 2


def seed(psi0: float, params: SystemParams, branch: str = "max", n_scan: int = 4096) -> ExtremalSeed:
    """Solve the stationarity equation at the start point and pick a branch.

    All roots of dH/dtheta = 0 on [0, 2 pi) are located by a sign-change
    scan plus bisection, Newton-polished to ~1e-15; the returned root
    maximizes (or minimizes) H over the root set.  A dense argmax of H
    is always added as a candidate so tangential roots cannot be missed.
    """
    if branch not in ("max", "min"):
        raise ValueError(f"branch must be 'max' or 'min', got {branch!r}")
    g = params.ratio
    grid = np.linspace(0.0, 2.0 * np.pi, n_scan + 1)
    vals = _seed_residual(grid, psi0, g)
    # vectorized bisection of every sign-change bracket
    flo, fhi = vals[:-1], vals[1:]
    bracketed = flo * fhi < 0.0
    lo = grid[:-1][bracketed]
    hi = grid[1:][bracketed]
    fl = flo[bracketed]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = _seed_residual(mid, psi0, g)
        to_hi = fl * fm <= 0.0
        hi = np.where(to_hi, mid, hi)
        lo = np.where(to_hi, lo, mid)
        fl = np.where(to_hi, fl, fm)
    roots = list(0.5 * (lo + hi)) + list(grid[:-1][flo == 0.0])
    # argmax of H as a safety candidate (catches non-crossing roots)
    h_grid = _hamiltonian_at_start(grid[:-1], psi0, g)
    roots.append(grid[int(np.argmax(h_grid))])
    roots.append(grid[int(np.argmin(h_grid))])
    polished = []
    for th in roots:
        for _ in range(8):
            f = _seed_residual(th, psi0, g)
            fp = _seed_residual_prime(th, psi0, g)
            if abs(fp) < 1e-14:
                break
            step = f / fp
            if abs(step) > 0.2:
                break
            th -= step
        if abs(_seed_residual(th, psi0, g)) <= 1e-12:
            polished.append(th % (2.0 * np.pi))
    if not polished:
        raise RuntimeError(f"no stationary control angle found for psi0={psi0}")
    polished = sorted(polished)
    unique = [polished[0]]
    for th in polished[1:]:
        if min(abs(th - unique[-1]), abs(th - unique[-1] - 2 * np.pi)) > 1e-9:
            unique.append(th)
    hs = [_hamiltonian_at_start(th, psi0, g) for th in unique]
    pick = int(np.argmax(hs)) if branch == "max" else int(np.argmin(hs))
    return ExtremalSeed(float(psi0), float(unique[pick]), branch)


def seed_grid(n_seeds: int, params: SystemParams, branch: str = "max") -> list[ExtremalSeed]:
    """Uniform half-offset grid of n_seeds costate angles on [0, 2 pi).

    The half offset avoids landing exactly on the two measure-zero
    values where the start point is a stationary extremal and the theta
    drift is 0/0.
    """
    psis = 2.0 * np.pi * (np.arange(n_seeds) + 0.5) / n_seeds
    return [seed(psi, params, branch=branch) for psi in psis]


# --- batched integration --------------------------------------------------


@dataclass
class ExtremalSweep:
    """Shared-grid samples of a family of extremals (covering space).

    data maps component name (z, R, p, q, theta) to an (n_seeds, m)
    array; R keeps its sign.  Samples after a seed's failure time are
    NaN.  `failed` seeds ended early (degenerate theta dynamics or a
    rejected-step collapse); everything before fail_tau remains valid.
    """

    tau: np.ndarray
    seeds: list[ExtremalSeed]
    data: dict[str, np.ndarray]
    failed: np.ndarray
    fail_tau: np.ndarray
    fail_reason: list

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)

    def states(self) -> np.ndarray:
        """Stacked (n_seeds, m, 5) array; requires a full-component sweep."""
        comps = [self.data[c] for c in ("z", "R", "p", "q", "theta")]
        return np.stack(comps, axis=-1)


_COMP_INDEX = {"z": 0, "R": 1, "p": 2, "q": 3, "theta": 4}


def _sweep_rhs(y: np.ndarray, params: SystemParams, den_tol: float) -> np.ndarray:
    """Vectorized extremal RHS on a (5, n) state block; degenerate columns
    get theta' = 0 and are dealt with at accept time."""
    z, R, p, q, th = y
    g = params.ratio
    st, ct = np.sin(th), np.cos(th)
    c2 = np.cos(2.0 * th)
    zp = -0.5 * g * z - R * ct
    rp = z * ct - 0.25 * g * R * (3.0 - c2) + g * st
    pp = 0.5 * g * p - q * ct
    qp = p * ct + 0.25 * g * q * (3.0 - c2)
    num = 0.125 * g * ((p * R + q * z) * (5.0 * st + np.sin(3.0 * th)) - 8.0 * p - 4.0 * g * q * ct ** 3)
    den = (p * R - q * z) * ct - g * q * (st + R * c2)
    safe = np.abs(den) >= den_tol
    thp = np.where(safe, num / np.where(safe, den, 1.0), 0.0)
    return np.stack([zp, rp, pp, qp, thp])


def sweep_extremals(
    seeds,
    T: float,
    params: SystemParams,
    *,
    cfg: IntegratorConfig | None = None,
    sample_dt: float | None = None,
    components=("z", "R"),
    den_tol: float = 1e-10,
    project_tol: float = 1e-11,
    max_branch_jump: float = 0.3,
) -> ExtremalSweep:
    """Integrate a family of extremals on a shared adaptive time grid.

    seeds may be ExtremalSeed objects or bare psi0 angles.  Samples are
    written on the uniform grid of spacing sample_dt via cubic Hermite
    dense output.  After every accepted step the control angle of each
    seed is re-projected onto the stationarity manifold dH/dtheta = 0
    (Newton), which pins the stationarity residual near roundoff instead
    of letting it drift with the integration error.
    """
    if T <= 0:
        raise ValueError(f"duration must be positive, got T={T}")
    seeds = [s if isinstance(s, ExtremalSeed) else seed(float(s), params) for s in seeds]
    n = len(seeds)
    if n == 0:
        raise ValueError("need at least one seed")
    cfg = cfg or IntegratorConfig()
    if sample_dt is None:
        sample_dt = T / 2048.0
    m = max(2, int(np.ceil(T / sample_dt)) + 1)
    tau = np.linspace(0.0, T, m)
    components = tuple(components)
    if any(c not in _COMP_INDEX for c in components):
        raise ValueError(f"unknown components in {components}")
    out = {c: np.full((n, m), np.nan) for c in components}

    y = np.stack([s.state0 for s in seeds], axis=1)  # (5, n)
    active = np.ones(n, dtype=bool)
    fail_tau = np.full(n, np.inf)
    fail_reason: list = [None] * n

    def rhs(t, yy):
        del t
        d = _sweep_rhs(yy, params, den_tol)
        return d * active  # frozen columns stay put

    def fail(cols, t, reason):
        for c in np.nonzero(cols)[0]:
            if active[c]:
                active[c] = False
                fail_tau[c] = t
                fail_reason[c] = reason

    def write(idx, values):
        rows = np.nonzero(active)[0]
        if rows.size == 0 or len(idx) == 0:
            return
        for c in components:
            comp = values[_COMP_INDEX[c]]  # (n, k)
            out[c][np.ix_(rows, idx)] = comp[rows]

    # seeds starting exactly on a degenerate angle are stationary; keep
    # their single valid sample and freeze them
    den0 = np.abs(hamiltonian_dtheta2(np.moveaxis(y, 0, -1), params))
    write(np.array([0]), y[:, :, None])
    fail(den0 < den_tol, 0.0, "degenerate start (stationary extremal)")

    f = rhs(0.0, y)
    t = 0.0
    h = min(1e-3, T)
    j_next = 1
    accepted = 0
    rejects = 0
    while t < T and j_next < m:
        h = min(h, T - t)
        if accepted >= cfg.max_steps:
            raise IntegrationError(f"step budget exceeded at tau={t}")
        y_new, f_new, err = dp45_step(rhs, t, y, h, f)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_col = np.sqrt(np.mean((err / scale) ** 2, axis=0))
        bad_col = ~np.isfinite(err_col)
        if np.any(bad_col & active):
            # isolate the blowing-up seeds and retry the step without them
            fail(bad_col, t, "non-finite step")
            f = rhs(t, y)
            rejects = 0
            continue
        norm = float(np.max(err_col[active])) if np.any(active) else 0.0
        if norm <= 1.0:
            t_new = T if (T - t - h) < 1e-15 * T else t + h
            j_hi = int(np.searchsorted(tau, t_new, side="right"))
            if j_hi > j_next:
                idx = np.arange(j_next, j_hi)
                s = ((tau[idx] - t) / h)[None, None, :]
                y0 = y[:, :, None]
                y1 = y_new[:, :, None]
                f0 = f[:, :, None]
                f1 = f_new[:, :, None]
                s2, s3 = s * s, s ** 3
                vals = (
                    (2 * s3 - 3 * s2 + 1) * y0
                    + (s3 - 2 * s2 + s) * h * f0
                    + (-2 * s3 + 3 * s2) * y1
                    + (s3 - s2) * h * f1
                )
                write(idx, vals)
                j_next = j_hi
            t, y = t_new, y_new
            accepted += 1
            rejects = 0
            # keep theta bounded and re-project it onto dH/dtheta = 0
            y[4] = np.mod(y[4] + np.pi, 2.0 * np.pi) - np.pi
            state_t = np.moveaxis(y, 0, -1)
            den = hamiltonian_dtheta2(state_t, params)
            fail(active & (np.abs(den) < den_tol), t, "denominator degeneracy")
            moved = np.zeros(n)
            for _ in range(2):
                res = hamiltonian_dtheta(np.moveaxis(y, 0, -1), params)
                den = hamiltonian_dtheta2(np.moveaxis(y, 0, -1), params)
                need = active & (np.abs(res) > project_tol) & (np.abs(den) > den_tol)
                if not np.any(need):
                    break
                step = np.zeros(n)
                step[need] = np.clip(res[need] / den[need], -0.5, 0.5)
                y[4] -= step
                moved += np.abs(step)
            fail(active & (moved > max_branch_jump), t, "argmax branch jump")
            f = rhs(t, y)
            grow = 5.0 if norm == 0 else min(5.0, 0.9 * norm ** -0.2)
            h *= max(0.2, grow)
            if not np.any(active):
                break
        else:
            rejects += 1
            if rejects > 60:
                worst = int(np.argmax(np.where(active, err_col, -np.inf)))
                fail(np.arange(n) == worst, t, "step collapse")
                f = rhs(t, y)
                rejects = 0
                continue
            h *= max(0.2, 0.9 * norm ** -0.2)
    failed = ~active
    return ExtremalSweep(tau, seeds, out, failed, fail_tau, fail_reason)


def sweep_extremals_parallel(
    seeds,
    T: float,
    params: SystemParams,
    *,
    n_threads: int = 1,
    cfg: IntegratorConfig | None = None,
    sample_dt: float | None = None,
    components=("z", "R"),
    block: int = 128,
) -> ExtremalSweep:
    """Sweep in fixed-size seed blocks, optionally spread over threads.

    The block decomposition (not the thread count) decides the shared
    adaptive grids, so the merged result is identical for any n_threads;
    worker threads only distribute blocks.  Blocks are merged back in
    seed order.
    """
    seeds = [s if isinstance(s, ExtremalSeed) else seed(float(s), params) for s in seeds]
    if sample_dt is None:
        sample_dt = T / 2048.0
    if len(seeds) <= block:
        return sweep_extremals(
            seeds, T, params, cfg=cfg, sample_dt=sample_dt, components=components
        )
    blocks = [seeds[i : i + block] for i in range(0, len(seeds), block)]

    def run(batch):
        return sweep_extremals(
            batch, T, params, cfg=cfg, sample_dt=sample_dt, components=components
        )

    if n_threads <= 1:
        parts = [run(b) for b in blocks]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, blocks))
    data = {c: np.vstack([p.data[c] for p in parts]) for c in parts[0].data}
    failed = np.concatenate([p.failed for p in parts])
    fail_tau = np.concatenate([p.fail_tau for p in parts])
    fail_reason = [r for p in parts for r in p.fail_reason]
    return ExtremalSweep(parts[0].tau, seeds, data, failed, fail_tau, fail_reason)


def normalize_states(states: np.ndarray) -> np.ndarray:
    """Fold covering-space samples to R >= 0 via (R,q,theta) -> (-R,-q,theta+pi)."""
    states = np.array(states, dtype=float)
    flip = states[..., 1] < 0.0
    states[..., 1] = np.where(flip, -states[..., 1], states[..., 1])
    states[..., 3] = np.where(flip, -states[..., 3], states[..., 3])
    states[..., 4] = np.where(flip, states[..., 4] + np.pi, states[..., 4])
    states[..., 4] = np.mod(states[..., 4] + np.pi, 2.0 * np.pi) - np.pi
    return states


def integrate_extremal(
    seedv: ExtremalSeed,
    T_scaled: float,
    params: SystemParams,
    cfg: IntegratorConfig | None = None,
    sample_dt: float | None = None,
) -> Trajectory:
    """Integrate one extremal and return a Trajectory of (z,R,p,q,theta).

    Stored samples are folded to R >= 0.  Failures of the theta dynamics
    (degenerate denominator, branch jump) raise IntegrationError with the
    failure time.
    """
    sweep = sweep_extremals(
        [seedv], T_scaled, params, cfg=cfg, sample_dt=sample_dt,
        components=("z", "R", "p", "q", "theta"),
    )
    if sweep.failed[0] and sweep.fail_tau[0] < T_scaled:
        raise IntegrationError(
            f"extremal failed at tau={sweep.fail_tau[0]}: {sweep.fail_reason[0]}"
        )
    states = normalize_states(sweep.states()[0])
    fs = np.moveaxis(_sweep_rhs(np.moveaxis(states, -1, 0), params, den_tol=1e-14), 0, -1)
    return Trajectory(sweep.tau, states, fs, meta={"seed": seedv, "time": "tau"})


# --- control recovery and replay ------------------------------------------


def recover_control(traj: Trajectory, params: SystemParams, r_min: float = 1e-8) -> ControlSchedule:
    """Reconstruct the physical coherent control u(t) along an extremal.

    Balancing the theta equation of the cylindrical system against the
    extremal's theta drift gives, back in physical time,

        2 kappa u = omega [ theta'_tau + (z/R) sin th
                            + (g/4) sin 2th - g cos th / R ].

    The sin(th) factor on the z/R term is forced by the theta component
    of the cylindrical drift; the whole expression is invariant under
    the R >= 0 fold.  Returns a piecewise-constant schedule with n = 0
    and midpoint-averaged values, times unscaled.
    """
    states = np.asarray(traj.ys, dtype=float)
    z, R, th = states[:, 0], states[:, 1], states[:, 4]
    if np.min(R) <= r_min:
        raise SingularityError(f"control recovery needs R > {r_min} along the path")
    g = params.ratio
    thp = theta_rhs(states, params)
    u_tau = params.omega * (
        thp + (z / R) * np.sin(th) + 0.25 * g * np.sin(2.0 * th) - g * np.cos(th) / R
    ) / (2.0 * params.kappa)
    times = traj.ts / params.omega
    u_pc = 0.5 * (u_tau[:-1] + u_tau[1:])
    return ControlSchedule(times[:-1], u_pc, np.zeros(len(u_pc)), T=float(times[-1]))


def _bloch_rhs_batch(r, u, params):
    # n = 0 replay path; r is (nb, 3), u is (nb,)
    ga, w, k = params.gamma, params.omega, params.kappa
    rx, ry, rz = r[:, 0], r[:, 1], r[:, 2]
    return np.stack(
        [
            -w * ry - 0.5 * ga * rx,
            w * rx - 0.5 * ga * ry - 2.0 * k * u * rz,
            ga - ga * rz + 2.0 * k * u * ry,
        ],
        axis=1,
    )


def simulate_piecewise_batch(r0s, edges, u_segments, params, max_angle: float = 0.05):
    """RK4 replay of piecewise-constant controls for a batch of initial states.

    r0s (nb, 3); edges (m+1,) segment boundaries; u_segments (nb, m).
    Substeps per segment scale with the largest rotation angle so fast
    alignment spikes stay accurate.  Returns states at edges, (nb, m+1, 3).
    """
    r0s = np.atleast_2d(np.asarray(r0s, dtype=float))
    edges = np.asarray(edges, dtype=float)
    u_segments = np.atleast_2d(np.asarray(u_segments, dtype=float))
    nb, msegs = u_segments.shape
    if len(edges) != msegs + 1:
        raise ValueError("edges must have one more entry than control segments")
    states = np.empty((nb, msegs + 1, 3))
    states[:, 0] = r0s
    y = r0s.copy()
    for k in range(msegs):
        span = edges[k + 1] - edges[k]
        u = u_segments[:, k]
        angle = max(
            float(np.max(np.abs(2.0 * params.kappa * u))) * span, params.omega * span
        )
        n_sub = max(1, int(np.ceil(angle / max_angle)))
        hh = span / n_sub
        for _ in range(n_sub):
            k1 = _bloch_rhs_batch(y, u, params)
            k2 = _bloch_rhs_batch(y + 0.5 * hh * k1, u, params)
            k3 = _bloch_rhs_batch(y + 0.5 * hh * k2, u, params)
            k4 = _bloch_rhs_batch(y + hh * k3, u, params)
            y = y + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[:, k + 1] = y
    return states


def replay_extremal(
    traj: Trajectory,
    params: SystemParams,
    u_max: float | None = None,
    from_north: bool = True,
):
    """Drive the Bloch equation with the recovered control of an extremal.

    When starting from the north pole (0,0,1) a short aligning spike
    first rotates the meridian angle from pi/2 to the extremal's theta0;
    its duration is pi/(2 kappa u_max), so pick u_max large enough that
    omega * duration is far below the comparison tolerance.

    Returns (r_states, schedule): Bloch states at the extremal's sample
    times, shape (m, 3).
    """
    if u_max is None:
        u_max = 1e6 * params.omega / (2.0 * params.kappa)
    sched = recover_control(traj, params)
    th0 = float(traj.ys[0, 4])
    times = np.concatenate([sched.times, [sched.T]])
    if from_north:
        dth = (th0 - 0.5 * np.pi + np.pi) % (2.0 * np.pi) - np.pi
        eps = np.pi / (2.0 * params.kappa * u_max)
        u_align = dth / (2.0 * params.kappa * eps)
        edges = np.concatenate([[0.0], eps + times])
        u_segments = np.concatenate([[u_align], sched.u])
        r0 = np.array([0.0, 0.0, 1.0])
        states = simulate_piecewise_batch(r0, edges, u_segments, params)
        return states[0, 1:], sched
    r0 = np.array([0.0, np.cos(th0), np.sin(th0)])
    states = simulate_piecewise_batch(r0, times, sched.u, params)
    return states[0], sched
