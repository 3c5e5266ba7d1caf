"""Ammann-Beenker patches by cut-and-project, plus square-lattice control disks.

Conventions:
  * 4D hypercubic lattice Z^4 projected with star vectors
    e_k = (cos(k pi/4), sin(k pi/4)) and perpendicular-space vectors
    f_k = (cos(3k pi/4), sin(3k pi/4)), k = 0..3.
  * Acceptance window: regular octagon (projection of the unit 4-cube into
    perpendicular space), apothem (1 + sqrt(2))/2.
  * Projected coordinates are divided by sqrt(2) so every edge has length
    1/sqrt(2).
  * Cutout: closed disk of radius r0 around (x0, y0), then recentered so the
    cutout center becomes the origin.
  * Site ids: sorted by (radius, angle) after recentering.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)
BOND_LENGTH = 1.0 / SQRT2

# Generic perpendicular-space window offset. Any small irrational-ish shift
# works; it keeps lattice points off the window boundary so the acceptance
# test never depends on a floating-point tie.
DEFAULT_WINDOW_OFFSET = (0.0123456789, 0.0198765432)

# Star vectors: rows are e_k (physical) and f_k (perpendicular).
_E_PAR = np.array([[np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)] for k in range(4)])
_E_PERP = np.array([[np.cos(3 * k * np.pi / 4), np.sin(3 * k * np.pi / 4)] for k in range(4)])

# Octagonal window: zonotope of the f_k with coefficients in [-1/2, 1/2].
# Facet normals are the 8 directions m*pi/4; the support value is the same
# apothem for each by eightfold symmetry.
_WINDOW_NORMALS = np.array(
    [[np.cos(m * np.pi / 4), np.sin(m * np.pi / 4)] for m in range(8)]
)
_WINDOW_APOTHEM = 0.5 * np.abs(_E_PERP @ _WINDOW_NORMALS.T).sum(axis=0)  # all equal

_UNIT_STEPS = np.eye(4, dtype=np.int64)


class NotBipartiteError(ValueError):
    """Raised when a graph admits no two-coloring (odd cycle present)."""


@dataclass(frozen=True)
class SystemSpec:
    """Circular-cutout Hofstadter system: radius, flux per square tile, origin offset."""

    r0: float
    phi: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not np.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi}")

    def key(self) -> str:
        return f"r0={self.r0!r},phi={self.phi!r},x0={self.x0!r},y0={self.y0!r}"


@dataclass
class TilingGraph:
    """Finite patch: recentered positions, 4D preimages, edges, sublattice labels."""

    positions: np.ndarray        # (N, 2) float, recentered
    preimages: np.ndarray        # (N, 4) int
    edges: np.ndarray            # (M, 2) int, each row sorted, rows lex-sorted
    sublattice: np.ndarray       # (N,) int8, 0 = A, 1 = B
    bond_length: float = BOND_LENGTH

    @property
    def n_sites(self) -> int:
        return len(self.positions)

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=np.int64)
        if len(self.edges):
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg


def _window_contains(perp: np.ndarray, offset, include_boundary: bool) -> np.ndarray:
    """Vectorized membership test of perpendicular-space points in the octagon."""
    p = perp - np.asarray(offset)
    proj = p @ _WINDOW_NORMALS.T
    tol = 1e-9 if include_boundary else -1e-12
    return np.all(proj <= _WINDOW_APOTHEM + tol, axis=1)


def _candidate_lattice_points(spec: SystemSpec) -> np.ndarray:
    """Enumerate all n in Z^4 whose physical image can lie in the cutout disk
    while the perpendicular image can lie in (a slightly padded) window."""
    # Work in raw (pre-scaling) physical units where edges have length 1.
    cx, cy = spec.x0 * SQRT2, spec.y0 * SQRT2
    rad = spec.r0 * SQRT2
    w = 1.45  # > octagon circumradius + max window offset

    # x = n0 + (n1 - n3)/sqrt2,   px = n0 - (n1 - n3)/sqrt2
    # y = n2 + (n1 + n3)/sqrt2,   py = -n2 + (n1 + n3)/sqrt2
    # hence n0 = (x + px)/2, n2 = (y - py)/2,
    # n1 = (x - px + y + py)/(2 sqrt2), n3 = (-(x - px) + y + py)/(2 sqrt2).
    x_lo, x_hi = cx - rad, cx + rad
    y_lo, y_hi = cy - rad, cy + rad
    n1_lo = int(np.floor((x_lo - w + y_lo - w) / (2 * SQRT2)))
    n1_hi = int(np.ceil((x_hi + w + y_hi + w) / (2 * SQRT2)))
    n3_lo = int(np.floor((-(x_hi + w) + y_lo - w) / (2 * SQRT2)))
    n3_hi = int(np.ceil((-(x_lo - w) + y_hi + w) / (2 * SQRT2)))

    n1, n3 = np.meshgrid(
        np.arange(n1_lo, n1_hi + 1), np.arange(n3_lo, n3_hi + 1), indexing="ij"
    )
    n1 = n1.ravel()
    n3 = n3.ravel()
    u = (n1 - n3) / SQRT2  # x-contribution
    v = (n1 + n3) / SQRT2  # y-contribution

    # For fixed (n1, n3): n0 in [u - w, u + w] (window) and x in the disk span;
    # likewise n2 around v. The window constraint is the tight one.
    pts = []
    for j0 in range(4):
        n0 = np.floor(u - w).astype(np.int64) + j0
        ok0 = (n0 >= u - w) & (n0 <= u + w) & (n0 + u >= x_lo) & (n0 + u <= x_hi)
        for j2 in range(4):
            n2 = np.floor(v - w).astype(np.int64) + j2
            ok = ok0 & (n2 >= v - w) & (n2 <= v + w) & (n2 + v >= y_lo) & (n2 + v <= y_hi)
            if not ok.any():
                continue
            pts.append(
                np.stack([n0[ok], n1[ok].astype(np.int64), n2[ok], n3[ok].astype(np.int64)], axis=1)
            )
    if not pts:
        return np.empty((0, 4), dtype=np.int64)
    return np.concatenate(pts, axis=0)


def _sort_sites(positions: np.ndarray) -> np.ndarray:
    """Stable site order: (radius, angle, x, y) after recentering."""
    r = np.hypot(positions[:, 0], positions[:, 1])
    ang = np.arctan2(positions[:, 1], positions[:, 0])
    return np.lexsort((positions[:, 1], positions[:, 0], ang, r))


def _edges_from_preimages(preimages: np.ndarray) -> np.ndarray:
    index = {tuple(p): i for i, p in enumerate(preimages)}
    edges = []
    for i, p in enumerate(preimages):
        for step in _UNIT_STEPS:
            j = index.get(tuple(p + step))
            if j is not None:
                edges.append((i, j) if i < j else (j, i))
    if not edges:
        return np.empty((0, 2), dtype=np.int64)
    arr = np.array(sorted(set(edges)), dtype=np.int64)
    return arr


def cut_and_project(spec: SystemSpec, window_offset=DEFAULT_WINDOW_OFFSET) -> TilingGraph:
    """Generate the circular Ammann-Beenker cutout for a system spec.

    A zero window offset reproduces the eightfold-symmetric tiling (boundary
    lattice points are then included by a closed-window tie rule).
    """
    cand = _candidate_lattice_points(spec)
    if len(cand):
        perp = cand @ _E_PERP
        include_boundary = window_offset[0] == 0.0 and window_offset[1] == 0.0
        cand = cand[_window_contains(perp, window_offset, include_boundary)]
    if len(cand):
        pos = (cand @ _E_PAR) / SQRT2
        d = np.hypot(pos[:, 0] - spec.x0, pos[:, 1] - spec.y0)
        keep = d <= spec.r0 + 1e-12
        cand, pos = cand[keep], pos[keep]
    if not len(cand):
        return TilingGraph(
            positions=np.empty((0, 2)),
            preimages=np.empty((0, 4), dtype=np.int64),
            edges=np.empty((0, 2), dtype=np.int64),
            sublattice=np.empty(0, dtype=np.int8),
        )
    pos = pos - np.array([spec.x0, spec.y0])
    order = _sort_sites(pos)
    pos, cand = pos[order], cand[order]
    edges = _edges_from_preimages(cand)
    labels = bipartition(len(pos), edges)
    return TilingGraph(positions=pos, preimages=cand, edges=edges, sublattice=labels)


def bipartition(n_sites: int, edges: np.ndarray) -> np.ndarray:
    """Two-color a graph; label 0 (A) is assigned to the smallest id of each
    component. Raises NotBipartiteError on an odd cycle."""
    adj = [[] for _ in range(n_sites)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    labels = np.full(n_sites, -1, dtype=np.int8)
    for root in range(n_sites):
        if labels[root] != -1:
            continue
        labels[root] = 0
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                if labels[j] == -1:
                    labels[j] = 1 - labels[i]
                    queue.append(j)
                elif labels[j] == labels[i]:
                    raise NotBipartiteError(
                        f"not bipartite: edge ({i},{j}) joins same-label sites"
                    )
    return labels


def coordination_profile(graph: TilingGraph):
    """Per-site degree plus the degree-7 and degree-8 site subsets."""
    deg = graph.degrees
    return deg, np.flatnonzero(deg == 7), np.flatnonzero(deg == 8)


def square_lattice_disk(r0: float, spacing: float, center_offset: float = 0.0) -> TilingGraph:
    """Axis-aligned square lattice cut in a closed disk of radius r0;
    4-regular in the interior, bipartite by coordinate parity.

    center_offset (in units of spacing, applied to both axes) moves the disk
    center off the lattice: 0 centers on a site, 0.5 on a plaquette center,
    which keeps the origin free for a flux tube."""
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    m = int(np.floor(r0 / spacing)) + 2
    i, j = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    xs = (i + center_offset) * spacing
    ys = (j + center_offset) * spacing
    keep = xs * xs + ys * ys <= r0**2 + 1e-12
    i, j = i[keep], j[keep]
    pos = np.stack([xs[keep], ys[keep]], axis=1).astype(float)
    order = _sort_sites(pos)
    pos = pos[order]
    pre = np.zeros((len(pos), 4), dtype=np.int64)
    pre[:, 0], pre[:, 1] = i[order], j[order]
    index = {(a, b): k for k, (a, b) in enumerate(zip(pre[:, 0], pre[:, 1]))}
    edges = []
    for k, (a, b) in enumerate(zip(pre[:, 0], pre[:, 1])):
        for da, db in ((1, 0), (0, 1)):
            other = index.get((a + da, b + db))
            if other is not None:
                edges.append((k, other) if k < other else (other, k))
    edges = (
        np.array(sorted(set(edges)), dtype=np.int64)
        if edges
        else np.empty((0, 2), dtype=np.int64)
    )
    labels = bipartition(len(pos), edges)
    return TilingGraph(
        positions=pos, preimages=pre, edges=edges, sublattice=labels, bond_length=spacing
    )


# ---------------------------------------------------------------------------
# Graph export / import


def write_edge_list(graph: TilingGraph, path) -> None:
    with open(path, "w") as fh:
        for a, b in graph.edges:
            fh.write(f"{a} {b}\n")


def read_edge_list(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                a, b = line.split()
                rows.append((int(a), int(b)))
    return np.array(rows, dtype=np.int64) if rows else np.empty((0, 2), dtype=np.int64)


def write_site_csv(graph: TilingGraph, path) -> None:
    deg = graph.degrees
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "degree", "sublattice"])
        for k in range(graph.n_sites):
            writer.writerow(
                [
                    k,
                    repr(float(graph.positions[k, 0])),
                    repr(float(graph.positions[k, 1])),
                    deg[k],
                    "A" if graph.sublattice[k] == 0 else "B",
                ]
            )


def read_site_csv(path):
    """Returns (positions, degrees, sublattice) in id order."""
    ids, xs, ys, degs, labels = [], [], [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ids.append(int(row["id"]))
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
            degs.append(int(row["degree"]))
            labels.append(0 if row["sublattice"] == "A" else 1)
    order = np.argsort(ids)
    pos = np.stack([np.array(xs)[order], np.array(ys)[order]], axis=1)
    return pos, np.array(degs)[order], np.array(labels, dtype=np.int8)[order]
