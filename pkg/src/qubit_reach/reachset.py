"""Reachable-set geometry: spiral certificates, barrier triangles, rasters.

Everything lives in the meridian plane (z, signed R); the 3D body in the
Bloch ball is the revolution of the half-plane set about the rx axis.
"Reachable by scaled time T" means time <= T: with a drift present there
is no waiting in place, and the union of wavefronts is the monotone
family the movie frames show.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import extremals
from .bloch import polar_rhs
from .extremals import sweep_extremals_parallel
from .ode import IntegratorConfig
from .params import SystemParams


# --- spiral-bounded exact-reachability region ------------------------------


@dataclass(frozen=True)
class SpiralRegion:
    """Region bounded by four logarithmic-spiral arcs.

    The arcs are (z, R) = (s1 e^{-g s/2} sin s, s2 e^{-g s/2} cos s) for
    s in [0, pi/2] and the four sign choices (s1, s2); they join the
    poles (0, +-1) to the points (+-e^{-g pi/4}, 0) on the z axis.  In
    polar form each arc is rho(a) = e^{-g a/2} with a the angular
    distance to the nearest pole, which gives an exact ray test for
    membership.  The region contains the origin-centred disc of radius
    1 - (pi/4) g.
    """

    gamma_ratio: float

    def arcs(self, n: int = 256) -> list[np.ndarray]:
        s = np.linspace(0.0, 0.5 * np.pi, n)
        rad = np.exp(-0.5 * self.gamma_ratio * s)
        out = []
        for sz in (1.0, -1.0):
            for sr in (1.0, -1.0):
                out.append(np.column_stack([sz * rad * np.sin(s), sr * rad * np.cos(s)]))
        return out

    def contains(self, z, R, tol: float = 1e-12):
        """Vectorized membership test of meridian points (z, R)."""
        z = np.asarray(z, dtype=float)
        R = np.asarray(R, dtype=float)
        rho = np.hypot(z, R)
        safe_rho = np.where(rho > 0.0, rho, 1.0)
        a = np.arccos(np.clip(np.abs(R) / safe_rho, -1.0, 1.0))
        bound = np.exp(-0.5 * self.gamma_ratio * a)
        return (rho <= tol) | (rho <= bound + tol)


def spiral_region(params: SystemParams) -> SpiralRegion:
    if params.gamma < 0:
        raise ValueError("gamma must be non-negative")
    return SpiralRegion(params.ratio)


def guaranteed_ball_radius(params: SystemParams) -> float:
    """Radius 1 - (pi/4) gamma/omega of the ball certified exactly reachable."""
    g = params.ratio
    if g >= 4.0 / np.pi:
        raise ValueError(
            f"guaranteed-ball certificate is vacuous for gamma/omega = {g} >= 4/pi"
        )
    return 1.0 - 0.25 * np.pi * g


def lacuna_alpha_bound(params: SystemParams) -> float:
    """Largest barrier slope: alpha < (1/2) (1 + (gamma/omega)^2)^(-1/2)."""
    if params.gamma <= 0:
        raise ValueError("lacuna certificates require gamma > 0")
    g = params.ratio
    return 0.5 / np.sqrt(1.0 + g * g)


# --- barrier triangles ------------------------------------------------------


@dataclass(frozen=True)
class BarrierTriangle:
    """Triangle near rho = 1 whose non-vertical edges repel trajectories.

    Vertices (rho = 1 - alpha beta g, phi = phi0) and (rho = 1,
    phi = phi0 +- beta), with g = gamma/omega.  The non-vertical edges
    are rho = 1 + s alpha g (phi - phi0 - s beta) for s = +-1; their
    outward normals in (rho, phi) are (-1, s alpha g).
    """

    phi0: float
    alpha: float
    beta: float
    gamma_ratio: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")

    def edge_rho(self, edge: str, phi):
        s = _edge_sign(edge)
        return 1.0 + s * self.alpha * self.gamma_ratio * (
            np.asarray(phi, dtype=float) - self.phi0 - s * self.beta
        )

    def edge_phi_range(self, edge: str) -> tuple[float, float]:
        s = _edge_sign(edge)
        if s > 0:
            return self.phi0, self.phi0 + self.beta
        return self.phi0 - self.beta, self.phi0

    def contains(self, rho, phi):
        rho = np.asarray(rho, dtype=float)
        phi = np.asarray(phi, dtype=float)
        lower = np.where(
            phi >= self.phi0, self.edge_rho("plus", phi), self.edge_rho("minus", phi)
        )
        return (np.abs(phi - self.phi0) <= self.beta) & (rho <= 1.0) & (rho >= lower)


def _edge_sign(edge: str) -> float:
    if edge in ("plus", "+"):
        return 1.0
    if edge in ("minus", "-"):
        return -1.0
    raise ValueError(f"edge must be 'plus' or 'minus', got {edge!r}")


def _polar_rhs_scaled(rho, phi, theta, g):
    """Polar velocity in rescaled time tau = omega t (vectorized)."""
    sp, cp = np.sin(phi), np.cos(phi)
    st = np.sin(theta)
    rho_dot = -0.5 * g * (rho + rho * sp * sp * st * st - 2.0 * sp * st)
    phi_dot = np.cos(theta) + (g / (2.0 * rho)) * cp * st * (2.0 - rho * sp * st)
    return rho_dot, phi_dot


def barrier_values(
    tri: BarrierTriangle, edge: str, phi, theta, params: SystemParams, rho=None
):
    """Outward-normal velocity component G on a non-vertical triangle edge.

    G_edge = <(rho', phi'), (-1, s alpha g)> in rescaled time, with the
    polar velocity evaluated on the edge line (or at an explicit ``rho``,
    e.g. the formal value at the middle of the vertical edge rho = 1).
    Positive values mean the admissible velocity points out of the
    triangle.  The two edge labels trade places under a clockwise angle
    convention; the certified quantity min(G_plus, G_minus) does not
    depend on the labelling.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lo, hi = tri.edge_phi_range(edge)
    if np.any(phi < lo - 1e-12) or np.any(phi > hi + 1e-12):
        raise ValueError(f"phi outside the {edge} edge range [{lo}, {hi}]")
    s = _edge_sign(edge)
    rho = tri.edge_rho(edge, phi) if rho is None else np.asarray(rho, dtype=float)
    if np.any(rho <= 1e-8):
        # delegate the singularity complaint to the scalar polar system
        polar_rhs((float(np.min(rho)), 0.0), 0.0, params)
    g = params.ratio
    rho_dot, phi_dot = _polar_rhs_scaled(rho, phi, theta, g)
    out = -rho_dot + s * tri.alpha * g * phi_dot
    return out if np.ndim(out) else float(out)


def barrier_certificate(
    phi0: float,
    alpha: float,
    beta: float,
    params: SystemParams,
    phi_grid: int = 2048,
    theta_grid: int = 720,
) -> bool:
    """Grid check that the triangle (phi0, alpha, beta) repels all velocities.

    True certifies (numerically, not by interval arithmetic) that no
    trajectory can cross the non-vertical edges inward for any control
    angle, so the triangle is unreachable from outside.  The poles
    phi0 = +-pi/2 are excluded: the leading positive term of G vanishes
    there.
    """
    if params.gamma <= 0:
        raise ValueError("barrier certificates require gamma > 0")
    if abs(np.sin(phi0)) >= 1.0 - 1e-12:
        raise ValueError("certificate requires |sin(phi0)| < 1 (phi0 != +-pi/2)")
    tri = BarrierTriangle(phi0, alpha, beta, params.ratio)
    thetas = np.linspace(0.0, 2.0 * np.pi, theta_grid, endpoint=False)[None, :]
    g = params.ratio
    for edge in ("plus", "minus"):
        s = _edge_sign(edge)
        lo, hi = tri.edge_phi_range(edge)
        phis = np.linspace(lo, hi, phi_grid)[:, None]
        rho = tri.edge_rho(edge, phis)
        rho_dot, phi_dot = _polar_rhs_scaled(rho, phis, thetas, g)
        G = -rho_dot + s * alpha * g * phi_dot
        if float(G.min()) <= 0.0:
            return False
    return True


# --- reachable-set rasters ---------------------------------------------------


@dataclass
class ReachableSet2D:
    """Occupancy raster of the meridian set plus its extracted boundary.

    raster[i, j] covers the cell centred at (z_i, R_j) on [-1, 1]^2; the
    set is mirror symmetric in R by construction.  boundary is a list of
    closed polylines (first vertex repeated last).
    """

    raster: np.ndarray
    T_scaled: float
    boundary: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.raster.shape[0])

    @property
    def cell(self) -> float:
        return 2.0 / self.n

    def axis_centers(self) -> np.ndarray:
        return -1.0 + (np.arange(self.n) + 0.5) * self.cell

    def occupied_centers(self) -> np.ndarray:
        ax = self.axis_centers()
        ii, jj = np.nonzero(self.raster)
        return np.column_stack([ax[ii], ax[jj]])


class ReachSweep:
    """First-passage raster of the extremal sweep from (z, R) = (0, 1).

    One batched integration to T_max records, for every raster cell, the
    earliest scaled time at which an extremal (or the filled strip
    between angularly adjacent extremals) enters it.  Thresholding that
    raster yields the reachable set for any T <= T_max, monotone in T by
    construction, which is also what makes movie frames cheap.

    Strips are filled in parameter space.  Adjacent-seed pairs whose
    paths separate by more than ``refine_cells`` cells are bisected with
    freshly integrated seeds (a straight chord across a wide gap could
    cut through a genuinely unreachable bay near the poles); remaining
    narrow gaps are bridged by linear interpolation between neighbouring
    paths, which stays within a small fraction of a cell of the true
    swept surface.
    """

    def __init__(
        self,
        params: SystemParams,
        T_max: float,
        n_seeds: int = 1024,
        raster: int = 512,
        cfg: IntegratorConfig | None = None,
        refine_cells: float = 2.0,
        max_extra_seeds: int | None = None,
        sample_dt: float | None = None,
        max_refine_rounds: int = 24,
        n_threads: int = 1,
    ):
        if n_seeds < 64:
            raise ValueError(f"need at least 64 seeds, got {n_seeds}")
        if T_max <= 0:
            raise ValueError("T_max must be positive")
        self.params = params
        self.T_max = float(T_max)
        self.n = int(raster)
        self.cell = 2.0 / self.n
        cfg = cfg or IntegratorConfig(abs_tol=1e-8, rel_tol=1e-8)
        if sample_dt is None:
            # successive samples at most ~0.45 cell apart (speed <= ~1.3)
            sample_dt = min(0.35 * self.cell, T_max / 64.0)
        self.sample_dt = float(sample_dt)
        self.n_threads = max(1, int(n_threads))
        if max_extra_seeds is None:
            max_extra_seeds = 4 * n_seeds

        def run(batch):
            sweep = sweep_extremals_parallel(
                batch, T_max, params, n_threads=self.n_threads, cfg=cfg,
                sample_dt=self.sample_dt, components=("z", "R"),
            )
            # paths frozen at tau = 0 (stationary extremals) carry no arc;
            # drop them from the family so gap refinement sees live pairs
            live = sweep.fail_tau > 0.0
            return sweep, live

        seeds = extremals.seed_grid(n_seeds, params)
        tried = {round(s.psi0, 12) for s in seeds}
        sweep, live = run(seeds)
        self.tau = sweep.tau
        psis = np.array([s.psi0 for s in seeds])[live]
        z, r = sweep.data["z"][live], sweep.data["R"][live]
        seeds = [s for s, ok in zip(seeds, live) if ok]
        n_failed = int(np.sum(sweep.failed))

        budget = max_extra_seeds
        for _ in range(max_refine_rounds):
            order = np.argsort(psis)
            gaps = self._pair_gaps(z[order], r[order])
            wide = np.nonzero(gaps > refine_cells * self.cell)[0]
            if len(wide) == 0 or budget <= 0:
                break
            take = wide[: max(budget, 0)]
            psi_sorted = psis[order]
            new_psis = []
            for k in take:
                a = psi_sorted[k]
                b = psi_sorted[(k + 1) % len(order)]
                if k + 1 == len(order):
                    b += 2.0 * np.pi
                mid = (0.5 * (a + b)) % (2.0 * np.pi)
                if round(mid, 12) in tried:
                    # already probed (e.g. a degenerate angle): offset instead
                    mid = (a + 0.625 * (b - a)) % (2.0 * np.pi)
                    if round(mid, 12) in tried:
                        continue
                tried.add(round(mid, 12))
                new_psis.append(mid)
            if not new_psis:
                break
            budget -= len(new_psis)
            new_seeds = [extremals.seed(p, params) for p in new_psis]
            new_sweep, live = run(new_seeds)
            n_failed += int(np.sum(new_sweep.failed))
            psis = np.concatenate([psis, np.asarray(new_psis)[live]])
            z = np.vstack([z, new_sweep.data["z"][live]])
            r = np.vstack([r, new_sweep.data["R"][live]])
            seeds = seeds + [s for s, ok in zip(new_seeds, live) if ok]

        order = np.argsort(psis)
        self.psis = psis[order]
        self.seeds = [seeds[i] for i in order]
        self.n_failed = n_failed
        self.unfilled_pairs: list[int] = []
        self.tau_min = self._rasterize(z[order], r[order], refine_cells)

    @staticmethod
    def _pair_gaps(z, r):
        """Max over time of the distance between angularly adjacent paths."""
        ns, m = z.shape
        nxt = np.roll(np.arange(ns), -1)
        out = np.zeros(ns)
        # column blocks keep the temporaries small
        for j0 in range(0, m, 1024):
            blk = slice(j0, min(m, j0 + 1024))
            dist = np.hypot(z[:, blk] - z[nxt, blk], r[:, blk] - r[nxt, blk])
            np.nan_to_num(dist, copy=False, nan=0.0)
            np.maximum(out, dist.max(axis=1), out=out)
        return out

    def _rasterize(self, z, r, refine_cells):
        ns, m = z.shape
        n = self.n
        inv = 1.0 / self.cell
        tau_min = np.full(n * n, np.inf)
        nxt = np.roll(np.arange(ns), -1)
        gaps = self._pair_gaps(z, r)
        # strips are bridged by chords only where the two paths run close
        # together; a chord across a wide gap could cut through a genuinely
        # unreachable bay, so wide moments stay unbridged (and recorded)
        fill_limit = 2.0 * refine_cells * self.cell
        self.unfilled_pairs = list(np.nonzero(gaps > fill_limit)[0])
        n_sub = np.ceil(np.minimum(gaps, fill_limit) * inv / 0.45).astype(int)
        pair_ids = np.nonzero(n_sub > 1)[0]
        lam_list = [np.arange(1, n_sub[k]) / n_sub[k] for k in pair_ids]
        if pair_ids.size:
            rep_a = np.concatenate([np.full(len(l), k) for k, l in zip(pair_ids, lam_list)])
            rep_b = nxt[rep_a]
            lam = np.concatenate(lam_list)
        else:
            rep_a = rep_b = np.zeros(0, dtype=int)
            lam = np.zeros(0)

        for j in range(m):
            zj, rj = z[:, j], r[:, j]
            ok = np.isfinite(zj)
            pz, pr = zj[ok], rj[ok]
            if rep_a.size:
                za, zb = zj[rep_a], zj[rep_b]
                ra, rb = rj[rep_a], rj[rep_b]
                good = np.isfinite(za) & np.isfinite(zb)
                good &= np.hypot(za - zb, ra - rb) <= fill_limit
                iz_ = lam[good] * za[good] + (1 - lam[good]) * zb[good]
                ir_ = lam[good] * ra[good] + (1 - lam[good]) * rb[good]
                pz = np.concatenate([pz, iz_])
                pr = np.concatenate([pr, ir_])
            if pz.size == 0:
                continue
            iz = np.clip(((pz + 1.0) * inv).astype(int), 0, n - 1)
            for sign in (1.0, -1.0):
                ir = np.clip(((sign * pr + 1.0) * inv).astype(int), 0, n - 1)
                flat = iz * n + ir
                fresh = np.isinf(tau_min[flat])
                tau_min[flat[fresh]] = self.tau[j]
        return tau_min.reshape(n, n)

    def occupancy(self, T: float) -> np.ndarray:
        if T > self.T_max + 1e-12:
            raise ValueError(f"raster was swept to T_max={self.T_max}, asked for T={T}")
        return self.tau_min <= T

    def reachable_set(self, T: float) -> ReachableSet2D:
        occ = self.occupancy(T)
        return ReachableSet2D(occ, T, boundary=marching_squares(occ))


def compute_reachable_set(
    T_scaled: float,
    n_seeds: int,
    raster: int,
    params: SystemParams,
    cfg: IntegratorConfig | None = None,
) -> ReachableSet2D:
    """One-shot reachable set at scaled time T (time <= T semantics)."""
    sweep = ReachSweep(params, T_scaled, n_seeds=n_seeds, raster=raster, cfg=cfg)
    return sweep.reachable_set(T_scaled)


# --- marching squares and revolution ----------------------------------------

# segment table: case index is v00 | v10 << 1 | v11 << 2 | v01 << 3 where
# vXY is the occupancy of corner (x + X, y + Y); entries are pairs of edge
# names.  The saddles 5 and 10 take the disconnected resolution (each
# inside corner is cut off separately).
_EDGE_MID = {
    "bottom": (0.5, 0.0),
    "top": (0.5, 1.0),
    "left": (0.0, 0.5),
    "right": (1.0, 0.5),
}
_MS_TABLE = {
    1: [("left", "bottom")],
    2: [("bottom", "right")],
    3: [("left", "right")],
    4: [("top", "right")],
    5: [("left", "bottom"), ("top", "right")],
    6: [("bottom", "top")],
    7: [("left", "top")],
    8: [("left", "top")],
    9: [("bottom", "top")],
    10: [("bottom", "right"), ("left", "top")],
    11: [("top", "right")],
    12: [("left", "right")],
    13: [("bottom", "right")],
    14: [("left", "bottom")],
}


def marching_squares(raster: np.ndarray) -> list[np.ndarray]:
    """Closed boundary polylines of a boolean raster over [-1, 1]^2.

    The raster is padded with an empty ring so every contour closes;
    vertices sit midway between adjacent cell centres.  On a binary grid
    every contour vertex has exactly two incident segments, so loops are
    recovered by walking the unused segment at each vertex.  Returns a
    list of (k, 2) arrays whose last vertex repeats the first.
    """
    n = raster.shape[0]
    cell = 2.0 / n
    pad = np.zeros((n + 2, n + 2), dtype=np.int8)
    pad[1:-1, 1:-1] = raster.astype(np.int8)
    case = (
        pad[:-1, :-1]
        | (pad[1:, :-1] << 1)
        | (pad[1:, 1:] << 2)
        | (pad[:-1, 1:] << 3)
    )
    xs, ys = np.nonzero((case > 0) & (case < 15))
    # edge midpoints live on the half-integer lattice; key by doubled index
    segs = []
    for i, j in zip(xs, ys):
        for ea, eb in _MS_TABLE[int(case[i, j])]:
            ax, ay = _EDGE_MID[ea]
            bx, by = _EDGE_MID[eb]
            ka = (2 * i + int(2 * ax), 2 * j + int(2 * ay))
            kb = (2 * i + int(2 * bx), 2 * j + int(2 * by))
            segs.append((ka, kb))
    adj: dict[tuple, list] = {}
    for sid, (ka, kb) in enumerate(segs):
        adj.setdefault(ka, []).append((sid, kb))
        adj.setdefault(kb, []).append((sid, ka))

    def coords(k):
        # doubled padded index -> meridian coordinates
        return (-1.0 + (0.5 * k[0] - 0.5) * cell, -1.0 + (0.5 * k[1] - 0.5) * cell)

    used = [False] * len(segs)
    loops = []
    for sid0, (ka, kb) in enumerate(segs):
        if used[sid0]:
            continue
        used[sid0] = True
        keys = [ka, kb]
        cur = kb
        while cur != keys[0]:
            step = None
            for sid, other in adj[cur]:
                if not used[sid]:
                    step = (sid, other)
                    break
            if step is None:
                break
            used[step[0]] = True
            keys.append(step[1])
            cur = step[1]
        loops.append(np.array([coords(k) for k in keys]))
    return loops


def revolve_to_3d(set2d: ReachableSet2D, n_angles: int = 64):
    """Revolve the R >= 0 half of the boundary about the rx axis.

    Returns (vertices, faces): vertices of shape (k * n_angles, 3) where
    k is the number of profile points, faces as (m, 3) integer triangles.
    Rejects open boundary polylines.
    """
    if n_angles < 3:
        raise ValueError("need at least 3 revolution angles")
    loops = set2d.boundary or marching_squares(set2d.raster)
    if not loops:
        raise ValueError("empty raster has no boundary to revolve")
    # the upper-half profile comes from the loop with the most R >= 0 arc
    loop = max(loops, key=lambda l: int(np.sum(l[:, 1] >= 0.0)))
    if not np.allclose(loop[0], loop[-1], atol=1e-12):
        raise ValueError("boundary polyline is not closed")
    pts = loop[:-1]
    k = len(pts)
    # walk the cyclic loop, keeping the R >= 0 chain with interpolated
    # axis crossings
    profile = []
    for i in range(k):
        a = pts[i]
        b = pts[(i + 1) % k]
        if a[1] >= 0.0:
            profile.append(a)
        if (a[1] < 0.0) != (b[1] < 0.0):
            t = a[1] / (a[1] - b[1])
            profile.append((1 - t) * a + t * b)
    if not profile:
        raise ValueError("boundary has no R >= 0 portion")
    profile = np.array(profile)
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    ca, sa = np.cos(angles), np.sin(angles)
    verts = np.empty((len(profile) * n_angles, 3))
    for i, (z, R) in enumerate(profile):
        base = i * n_angles
        verts[base : base + n_angles, 0] = z
        verts[base : base + n_angles, 1] = R * ca
        verts[base : base + n_angles, 2] = R * sa
    faces = []
    for i in range(len(profile) - 1):
        for kk in range(n_angles):
            a = i * n_angles + kk
            b = i * n_angles + (kk + 1) % n_angles
            c = (i + 1) * n_angles + (kk + 1) % n_angles
            d = (i + 1) * n_angles + kk
            faces.append((a, b, c))
            faces.append((a, c, d))
    return verts, np.array(faces, dtype=int)


def write_obj(path, vertices, faces) -> None:
    """Minimal OBJ export of a triangle mesh."""
    with open(path, "w") as fh:
        for v in vertices:
            fh.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
