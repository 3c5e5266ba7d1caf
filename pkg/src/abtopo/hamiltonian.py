"""Hofstadter Hamiltonians with Landau-gauge Peierls phases, flux-tube
insertion, on-site disorder, and the sublattice chiral operator."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .tiling import NotBipartiteError, SystemSpec, TilingGraph

MATRIX_MAGIC = b"BLTH"


@dataclass
class HoppingMatrix:
    """Dense Hermitian hopping matrix plus the provenance needed to rebuild it."""

    matrix: np.ndarray           # (N, N) complex128
    spec: SystemSpec | None = None
    phi_c: float = 0.0
    disorder_w: float = 0.0
    disorder_seed: int | None = None

    @property
    def dimension(self) -> int:
        return len(self.matrix)


def build_hofstadter(graph: TilingGraph, phi: float) -> HoppingMatrix:
    """Assemble H = -sum_<ij> exp(i theta_ij) |r_j><r_i| in the Landau gauge,
    theta_ij = 2 pi phi (y_j - y_i)(x_j + x_i). Coordinates are the recentered
    ones, so phases are tied to the cutout origin."""
    n = graph.n_sites
    h = np.zeros((n, n), dtype=np.complex128)
    if len(graph.edges):
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        x, y = graph.positions[:, 0], graph.positions[:, 1]
        theta = 2 * np.pi * phi * (y[j] - y[i]) * (x[j] + x[i])
        amp = -np.exp(1j * theta)
        h[j, i] = amp
        h[i, j] = np.conj(amp)
    return HoppingMatrix(matrix=h)


def flux_tube_phases(hm: HoppingMatrix, graph: TilingGraph, phi_c: float) -> HoppingMatrix:
    """Multiply each hopping by the flux-tube Peierls phase
    exp(i phi_c arg(z_j / z_i)), arg branch (-pi, pi]; tube at the origin."""
    z = graph.positions[:, 0] + 1j * graph.positions[:, 1]
    h = hm.matrix.copy()
    if phi_c != 0.0 and len(graph.edges):
        if np.min(np.abs(z)) < 1e-12:
            raise ValueError("flux tube coincides with site")
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        # np.angle returns (-pi, pi]; values of exactly -pi cannot occur for
        # a ratio off the branch cut, and pi maps correctly.
        theta = phi_c * np.angle(z[j] / z[i])
        phase = np.exp(1j * theta)
        h[j, i] = h[j, i] * phase
        h[i, j] = np.conj(h[j, i])
    return replace(hm, matrix=h, phi_c=phi_c)


def apply_disorder(hm: HoppingMatrix, w: float, seed: int) -> HoppingMatrix:
    """Add one uniform on-site energy per site, drawn from [-w/2, w/2]."""
    if w < 0:
        raise ValueError(f"disorder magnitude must be >= 0, got {w}")
    h = hm.matrix.copy()
    if w > 0:
        rng = np.random.default_rng(seed)
        h[np.diag_indices_from(h)] += rng.uniform(-w / 2, w / 2, size=len(h))
    return replace(hm, matrix=h, disorder_w=w, disorder_seed=seed)


def chiral_operator(graph: TilingGraph) -> np.ndarray:
    """Diagonal of the chiral symmetry operator: +1 on sublattice A, -1 on B.

    Anticommutes with any disorder-free hopping matrix on the same graph
    (phases live on edges, which always join opposite sublattices)."""
    if graph.n_sites and graph.sublattice.min() < 0:
        raise NotBipartiteError("graph has no sublattice labels")
    return np.where(graph.sublattice == 0, 1.0, -1.0)


def anticommutator_norm(hm: HoppingMatrix, gamma: np.ndarray) -> float:
    """max |(Gamma H Gamma + H)_ij|; < 1e-12 for disorder-free matrices."""
    h = hm.matrix
    return float(np.abs(gamma[:, None] * h * gamma[None, :] + h).max())


def write_matrix(hm: HoppingMatrix, path) -> None:
    """Little-endian debug dump: magic, u64 N, row-major complex f64 pairs."""
    h = np.ascontiguousarray(hm.matrix, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<Q", len(h)))
        fh.write(h.astype("<c16").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(16 * n * n), dtype="<c16")
    return data.reshape(n, n).astype(np.complex128)
