"""First-passage lookup table (z1, R1) -> (psi0, theta0, T_min).

The sweep of extremals from (z, R) = (0, 1) is recorded on a grid over
the unit half-disc: each cell stores the seed of the earliest extremal
passing through it and the scaled first-passage time.  Optimal controls
to a target are then recovered by replaying the stored seed, no fresh
two-point boundary solve required.

File format: versioned CSV, diffable and language neutral.

    #qubit-reach-table v1 gamma_ratio=<val> grid=<N>
    i,j,psi0,theta0,Tmin

Empty cells are omitted.  Floats are written with repr so a save/load
round trip is lossless and byte identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .extremals import ExtremalSeed, seed_grid, sweep_extremals_parallel
from .ode import IntegratorConfig
from .params import SystemParams

MAGIC = "#qubit-reach-table v1"


class UnreachableError(ValueError):
    """No recorded extremal passes near the queried target."""


@dataclass
class LookupTable:
    """Grid over the half-disc [-1,1] x [0,1] with square cells 2/grid_n.

    Arrays are indexed [i, j] with i the z cell and j the R cell; mask
    marks nonempty cells.
    """

    gamma_ratio: float
    grid_n: int
    psi0: np.ndarray = field(default=None)
    theta0: np.ndarray = field(default=None)
    tmin: np.ndarray = field(default=None)
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        nz, nr = self.grid_n, self.grid_n // 2
        if self.psi0 is None:
            self.psi0 = np.zeros((nz, nr))
            self.theta0 = np.zeros((nz, nr))
            self.tmin = np.full((nz, nr), np.inf)
            self.mask = np.zeros((nz, nr), dtype=bool)

    @property
    def cell(self) -> float:
        return 2.0 / self.grid_n

    def cell_of(self, z: float, R: float) -> tuple[int, int]:
        i = int(np.clip((z + 1.0) / self.cell, 0, self.grid_n - 1))
        j = int(np.clip(R / self.cell, 0, self.grid_n // 2 - 1))
        return i, j

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return -1.0 + (i + 0.5) * self.cell, (j + 0.5) * self.cell

    def records(self):
        """Iterate nonempty cells as (i, j, psi0, theta0, tmin)."""
        for i, j in zip(*np.nonzero(self.mask)):
            yield int(i), int(j), float(self.psi0[i, j]), float(self.theta0[i, j]), float(
                self.tmin[i, j]
            )


def build_table(
    params: SystemParams,
    n_seeds: int = 4096,
    T_max_scaled: float = 10.0,
    grid_resolution: int = 256,
    cfg: IntegratorConfig | None = None,
    sample_dt: float | None = None,
    n_threads: int = 1,
) -> LookupTable:
    """Sweep extremals and record the first passage through every cell.

    Ties between extremals entering a cell at the same sampled time are
    broken toward the lower seed index, deterministically.  Unreached
    cells stay empty.  Requires n_seeds >= 256 so the angular spacing of
    the sweep stays below the cell size of sensible grids.
    """
    if n_seeds < 256:
        raise ValueError(f"need at least 256 seeds, got {n_seeds}")
    if grid_resolution < 2 or grid_resolution % 2:
        raise ValueError("grid resolution must be even and >= 2")
    table = LookupTable(params.ratio, grid_resolution)
    cfg = cfg or IntegratorConfig(abs_tol=1e-8, rel_tol=1e-8)
    if sample_dt is None:
        sample_dt = min(0.35 * table.cell, T_max_scaled / 64.0)
    seeds = seed_grid(n_seeds, params)
    sweep = sweep_extremals_parallel(
        seeds, T_max_scaled, params, n_threads=n_threads, cfg=cfg,
        sample_dt=sample_dt, components=("z", "R"),
    )
    z = sweep.data["z"]
    r = np.abs(sweep.data["R"])
    ns, m = z.shape
    ok = np.isfinite(z)
    iz = np.clip(((z + 1.0) / table.cell).astype(int), 0, grid_resolution - 1)
    ir = np.clip((r / table.cell).astype(int), 0, grid_resolution // 2 - 1)
    flat = (iz * (grid_resolution // 2) + ir)[ok]
    tau_idx = np.broadcast_to(np.arange(m), (ns, m))[ok]
    seed_idx = np.broadcast_to(np.arange(ns)[:, None], (ns, m))[ok]
    # sort by (tau, seed) descending and let later writes win: the final
    # value per cell is the earliest passage, lowest seed on ties
    order = np.lexsort((seed_idx, tau_idx))[::-1]
    nz, nr = grid_resolution, grid_resolution // 2
    tmin_flat = np.full(nz * nr, np.inf)
    psi_flat = np.zeros(nz * nr)
    th_flat = np.zeros(nz * nr)
    mask_flat = np.zeros(nz * nr, dtype=bool)
    psis = np.array([s.psi0 for s in seeds])
    th0s = np.array([s.theta0 for s in seeds])
    f = flat[order]
    tmin_flat[f] = sweep.tau[tau_idx[order]]
    psi_flat[f] = psis[seed_idx[order]]
    th_flat[f] = th0s[seed_idx[order]]
    mask_flat[f] = True
    table.tmin = tmin_flat.reshape(nz, nr)
    table.psi0 = psi_flat.reshape(nz, nr)
    table.theta0 = th_flat.reshape(nz, nr)
    table.mask = mask_flat.reshape(nz, nr)
    return table


def query(table: LookupTable, z1: float, R1: float, search_cells: int = 2):
    """Seed and first-passage time of the cell containing (z1, R1).

    Falls back to the nearest nonempty cell within ``search_cells``
    (Chebyshev) when the exact cell is empty; beyond that the target is
    reported unreachable.  The target must lie in the closed unit
    half-disc R1 >= 0.
    """
    if R1 < 0:
        raise ValueError("table targets live in the half-disc R >= 0; fold R negative targets")
    if z1 * z1 + R1 * R1 > 1.0 + 1e-9:
        raise ValueError(f"target ({z1}, {R1}) lies outside the unit disc")
    i0, j0 = table.cell_of(z1, R1)
    if table.mask[i0, j0]:
        return table.psi0[i0, j0], table.theta0[i0, j0], table.tmin[i0, j0]
    best = None
    for i in range(max(0, i0 - search_cells), min(table.grid_n, i0 + search_cells + 1)):
        for j in range(max(0, j0 - search_cells), min(table.grid_n // 2, j0 + search_cells + 1)):
            if not table.mask[i, j]:
                continue
            zc, rc = table.cell_center(i, j)
            d = (zc - z1) ** 2 + (rc - R1) ** 2
            cand = (d, i, j)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise UnreachableError(
            f"no recorded extremal within {search_cells} cells of ({z1}, {R1})"
        )
    _, i, j = best
    return table.psi0[i, j], table.theta0[i, j], table.tmin[i, j]


def query_seed(table: LookupTable, z1: float, R1: float, search_cells: int = 2) -> ExtremalSeed:
    psi0, theta0, _ = query(table, z1, R1, search_cells)
    return ExtremalSeed(float(psi0), float(theta0))


def save(table: LookupTable, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{MAGIC} gamma_ratio={table.gamma_ratio!r} grid={table.grid_n}\n")
        fh.write("i,j,psi0,theta0,Tmin\n")
        for i, j, psi0, theta0, tmin in table.records():
            fh.write(f"{i},{j},{psi0!r},{theta0!r},{tmin!r}\n")


_HEADER_RE = re.compile(
    r"^#qubit-reach-table v(?P<version>\d+) gamma_ratio=(?P<ratio>[^ ]+) grid=(?P<grid>\d+)$"
)


def load(path) -> LookupTable:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty table file")
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise ValueError(f"{path}: bad magic header {lines[0]!r}")
    if m.group("version") != "1":
        raise ValueError(f"{path}: unsupported table version {m.group('version')}")
    if len(lines) < 2 or lines[1] != "i,j,psi0,theta0,Tmin":
        raise ValueError(f"{path}: missing column header")
    table = LookupTable(float(m.group("ratio")), int(m.group("grid")))
    for ln, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"{path}:{ln}: truncated row {line!r}")
        i, j = int(parts[0]), int(parts[1])
        table.psi0[i, j] = float(parts[2])
        table.theta0[i, j] = float(parts[3])
        table.tmin[i, j] = float(parts[4])
        table.mask[i, j] = True
    return table
