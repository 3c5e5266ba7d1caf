"""Crosshair marker field, radius-cumulated profiles, and plateau detection.

The crosshair sits at the origin of the recentered graph. Half-plane
projectors use the Heaviside convention theta(0) = 1, i.e. x >= 0 / y >= 0.

Per-Fermi-level cost is O(N k^2 + k^3) with k the occupied count; occupations
above N/2 are evaluated through the complement block (the per-site marker of
the occupied subspace is the exact negation of the marker of the empty
subspace), so the effective k never exceeds N/2. For disorder-free spectra
chiral symmetry additionally maps occupation k to N - k by negation, halving
the number of Fermi levels that need any work at all.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .spectral import Spectrum

RADIUS_GROUP_TOL = 1e-9


@dataclass
class CrosshairProfile:
    """Marker data at one Fermi level (occupation k = fermi_index + 1)."""

    fermi_index: int
    field: np.ndarray | None     # per-site marker values (None if not retained)
    radii: np.ndarray            # sorted distinct site radii
    lam: np.ndarray              # cumulated marker at each radius
    q: float                     # max_r lam
    argmax_radius: float

    @property
    def q_min(self) -> float:
        return float(self.lam.min())


def half_plane_masks(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the two half-plane projectors (crosshair at the origin)."""
    return (positions[:, 0] >= 0.0).astype(float), (positions[:, 1] >= 0.0).astype(float)


def crosshair_field(spectrum: Spectrum, k: int, positions: np.ndarray) -> np.ndarray:
    """Per-site marker 4 pi Im <r| P theta_x P theta_y P |r> at occupation k."""
    engine = CrosshairEngine(spectrum, positions)
    return engine.field(k)


def crosshair_field_direct(spectrum: Spectrum, k: int, positions: np.ndarray) -> np.ndarray:
    """Dense N x N reference evaluation of the defining triple product.

    Independent oracle for the eigenbasis path; O(N^3) regardless of k."""
    tx, ty = half_plane_masks(positions)
    v = spectrum.states[:, :k]
    p = v @ v.conj().T
    m = p @ (tx[:, None] * (p @ (ty[:, None] * p)))
    return 4 * np.pi * np.imag(np.diagonal(m))


class CrosshairEngine:
    """Shared precomputation for evaluating many Fermi levels of one spectrum."""

    def __init__(self, spectrum: Spectrum, positions: np.ndarray):
        self.spectrum = spectrum
        self.n = spectrum.n
        self.u = spectrum.states
        tx, ty = half_plane_masks(positions)
        # a_x[i, j] = <psi_i| theta_x |psi_j>; occupied/empty blocks are slices.
        self.ax = self.u.conj().T @ (tx[:, None] * self.u)
        self.ay = self.u.conj().T @ (ty[:, None] * self.u)
        radii = np.hypot(positions[:, 0], positions[:, 1])
        self.site_order = np.argsort(radii, kind="stable")
        sorted_r = radii[self.site_order]
        # Group sites at (numerically) equal radius so lam is evaluated once
        # per distinct radius.
        if self.n:
            new_group = np.empty(self.n, dtype=bool)
            new_group[0] = True
            new_group[1:] = np.diff(sorted_r) > RADIUS_GROUP_TOL
            self.group_ends = np.flatnonzero(np.concatenate([new_group[1:], [True]]))
            self.radii = sorted_r[self.group_ends]
        else:
            self.group_ends = np.empty(0, dtype=np.int64)
            self.radii = np.empty(0)

    def field(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.n:
            raise ValueError(f"occupation k={k} outside [0, {self.n}]")
        m = min(k, self.n - k)
        if m == 0:
            return np.zeros(self.n)
        if k <= self.n - k:
            cols, sign = slice(0, k), 1.0
        else:
            cols, sign = slice(k, self.n), -1.0
        prod = self.ax[cols, cols] @ self.ay[cols, cols]
        t = self.u[:, cols] @ prod
        return sign * 4 * np.pi * np.einsum("ij,ij->i", t, self.u[:, cols].conj()).imag

    def lam_from_field(self, field: np.ndarray) -> np.ndarray:
        return np.cumsum(field[self.site_order])[self.group_ends]

    def profile(self, fermi_index: int, keep_field: bool = True) -> CrosshairProfile:
        field = self.field(fermi_index + 1)
        lam = self.lam_from_field(field)
        return _make_profile(fermi_index, field if keep_field else None, self.radii, lam)

    def all_lam(self, occupations: np.ndarray | None = None, chiral: bool = False) -> np.ndarray:
        """lam rows for every Fermi index 0..N-1.

        occupations[i] is the occupied count used for Fermi level E_i
        (defaults to i + 1; pass Spectrum.fermi_occupations() to keep
        degenerate multiplets together). chiral=True exploits disorder-free
        chiral symmetry: the profile at occupation N - k is the negation of
        the profile at occupation k."""
        n = self.n
        if occupations is None:
            occupations = np.arange(1, n + 1)
        out = np.empty((n, len(self.radii)))
        lam_by_k: dict[int, np.ndarray] = {}
        for k in sorted(set(int(k) for k in occupations)):
            if chiral and (n - k) in lam_by_k:
                lam_by_k[k] = -lam_by_k[n - k]
            else:
                lam_by_k[k] = self.lam_from_field(self.field(k))
        for i in range(n):
            out[i] = lam_by_k[int(occupations[i])]
        return out


def _make_profile(fermi_index, field, radii, lam) -> CrosshairProfile:
    if len(lam):
        jmax = int(np.argmax(lam))
        q, rmax = float(lam[jmax]), float(radii[jmax])
    else:
        q, rmax = 0.0, 0.0
    return CrosshairProfile(
        fermi_index=fermi_index, field=field, radii=radii, lam=lam, q=q, argmax_radius=rmax
    )


def cumulate(field: np.ndarray, graph, fermi_index: int = 0) -> CrosshairProfile:
    """Cumulated marker Lambda(r, E) at every distinct site radius, its maximum
    Q and the radius attaining it."""
    radii = graph.radii
    order = np.argsort(radii, kind="stable")
    sorted_r = radii[order]
    csum = np.cumsum(field[order])
    if len(sorted_r):
        new_group = np.empty(len(sorted_r), dtype=bool)
        new_group[0] = True
        new_group[1:] = np.diff(sorted_r) > RADIUS_GROUP_TOL
        ends = np.flatnonzero(np.concatenate([new_group[1:], [True]]))
        uniq_r, lam = sorted_r[ends], csum[ends]
    else:
        uniq_r, lam = np.empty(0), np.empty(0)
    return _make_profile(fermi_index, field, uniq_r, lam)


def profile_from_lam(fermi_index: int, radii: np.ndarray, lam: np.ndarray) -> CrosshairProfile:
    return _make_profile(fermi_index, None, radii, lam)


def chiral_reflection_check(spectrum: Spectrum, k: int, positions: np.ndarray) -> float:
    """max_r |C(r, E) + C(r, -E)| with both sides evaluated from their own
    occupied blocks (occupations k and N - k); meaningful for disorder-free H."""
    n = spectrum.n
    tx, ty = half_plane_masks(positions)

    def _field(kk):
        v = spectrum.states[:, :kk]
        a = v.conj().T @ (tx[:, None] * v)
        b = v.conj().T @ (ty[:, None] * v)
        t = v @ (a @ b)
        return 4 * np.pi * np.einsum("ij,ij->i", t, v.conj()).imag

    return float(np.abs(_field(k) + _field(n - k)).max())


def plateau_detect(profile: CrosshairProfile, eps: float, delta_r: float) -> int | None:
    """Nonzero integer n if lam stays inside (n - eps, n + eps) over a
    contiguous radius span >= delta_r; None otherwise."""
    if not (eps > 0 and delta_r > 0):
        raise ValueError("eps and delta_r must be positive")
    lam, radii = profile.lam, profile.radii
    nearest = np.rint(lam).astype(int)
    ok = (np.abs(lam - nearest) < eps) & (nearest != 0)
    start = None
    for j in range(len(lam) + 1):
        if j < len(lam) and ok[j] and (start is None or nearest[j] == nearest[start]):
            if start is None:
                start = j
            continue
        if start is not None and radii[j - 1] - radii[start] >= delta_r:
            return int(nearest[start])
        # a qualifying run may restart at j itself (different integer)
        start = j if j < len(lam) and ok[j] else None
    return None


# ---------------------------------------------------------------------------
# CSV emission


def write_profile_csv(profiles, path) -> None:
    """Rows: fermi_index,radius,lambda."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fermi_index", "radius", "lambda"])
        for p in profiles:
            for r, v in zip(p.radii, p.lam):
                writer.writerow([p.fermi_index, repr(float(r)), repr(float(v))])


def write_field_csv(field: np.ndarray, graph, path) -> None:
    """Rows: site_id,x,y,c_value (plot-ready density map)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "x", "y", "c_value"])
        for i in range(graph.n_sites):
            writer.writerow(
                [i, repr(graph.positions[i, 0]), repr(graph.positions[i, 1]), repr(float(field[i]))]
            )
