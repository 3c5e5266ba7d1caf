"""Dense diagonalization, occupation bookkeeping, flux-resolved spectra,
Lorentzian density of states, and a disk cache for eigendecompositions."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import HoppingMatrix, build_hofstadter
from .tiling import TilingGraph

CACHE_MAGIC = b"BLTS"

HERMITICITY_TOL = 1e-12


class NumericalError(RuntimeError):
    """A numerical stage produced an invalid result."""


@dataclass
class Spectrum:
    """Full eigendecomposition: ascending eigenvalues, eigenvector columns."""

    energies: np.ndarray         # (N,) float64 ascending
    states: np.ndarray           # (N, N) complex128, column i <-> energies[i]
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.energies)

    def occupation_count(self, e_fermi: float) -> int:
        """Number of eigenvalues <= E (closed inequality, so E = E_j gives j+1)."""
        return int(np.searchsorted(self.energies, e_fermi, side="right"))

    def occupied_block(self, e_fermi: float) -> tuple[int, np.ndarray]:
        """(k, first k eigenvector columns); the N x N projector is never built."""
        k = self.occupation_count(e_fermi)
        return k, self.states[:, :k]

    def fermi_occupations(self, tol: float = 1e-12) -> np.ndarray:
        """Occupation count for a Fermi level at each eigenvalue E_i.

        The closed inequality E_j <= E_i keeps whole degenerate multiplets
        together; eigenvalues closer than tol are treated as one multiplet so
        the occupied subspace is always well-defined."""
        n = self.n
        occ = np.empty(n, dtype=np.int64)
        if n == 0:
            return occ
        breaks = np.diff(self.energies) > tol
        group_end = n - 1
        for i in range(n - 1, -1, -1):
            occ[i] = group_end + 1
            if i > 0 and breaks[i - 1]:
                group_end = i - 1
        return occ


def diagonalize(hm: HoppingMatrix, provenance: dict | None = None) -> Spectrum:
    h = hm.matrix
    dev = np.abs(h - h.conj().T).max() if len(h) else 0.0
    if dev > HERMITICITY_TOL:
        raise NumericalError(f"matrix not Hermitian: max deviation {dev:.3e}")
    energies, states = np.linalg.eigh(h)
    return Spectrum(energies=energies, states=states, provenance=dict(provenance or {}))


def butterfly(graph: TilingGraph, phi_grid) -> np.ndarray:
    """Eigenvalues-only pass over a flux grid; row g holds the spectrum at
    phi_grid[g]."""
    out = np.empty((len(phi_grid), graph.n_sites))
    for g, phi in enumerate(phi_grid):
        out[g] = np.linalg.eigvalsh(build_hofstadter(graph, phi).matrix)
    return out


def default_dos_width(energies: np.ndarray) -> float:
    """50 times the median consecutive energy gap."""
    gaps = np.diff(np.sort(energies))
    return 50.0 * float(np.median(gaps))


@dataclass
class DOSCurve:
    grid: np.ndarray
    values: np.ndarray
    eps: float
    subset: np.ndarray | None = None


def density_of_states(
    spec: Spectrum, eps: float | None = None, subset=None, grid: np.ndarray | None = None
) -> DOSCurve:
    """Lorentzian-broadened DOS, normalized by the full state count N so that
    subset curves sum pointwise to the full curve."""
    if eps is None:
        eps = default_dos_width(spec.energies)
    if not eps > 0:
        raise ValueError(f"DOS width must be positive, got {eps}")
    e = spec.energies if subset is None else spec.energies[np.asarray(subset, dtype=int)]
    if grid is None:
        # a Lorentzian keeps ~2/(pi L) of its mass beyond +-L eps; an 80 eps
        # pad caps the truncation loss of the integrated curve below 1%
        lo = spec.energies[0] - 80 * eps
        hi = spec.energies[-1] + 80 * eps
        grid = np.linspace(lo, hi, max(2000, int(np.ceil((hi - lo) / (eps / 4)))))
    vals = (eps / np.pi / spec.n) * np.sum(
        1.0 / ((grid[:, None] - e[None, :]) ** 2 + eps**2), axis=1
    )
    return DOSCurve(
        grid=grid,
        values=vals,
        eps=eps,
        subset=None if subset is None else np.asarray(subset, dtype=int),
    )


# ---------------------------------------------------------------------------
# Disk cache


def provenance_key(provenance: dict) -> str:
    """Content hash of the provenance record (spec, phi_c, W, seed, ...)."""
    blob = json.dumps(provenance, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class SpectrumCache:
    """File-per-spectrum cache; writes are atomic (temp file then rename)."""

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, provenance: dict) -> str:
        return os.path.join(self.directory, provenance_key(provenance) + ".blts")

    def load(self, provenance: dict) -> Spectrum | None:
        path = self._path(provenance)
        if not os.path.exists(path):
            return None
        return read_spectrum(path)

    def store(self, spectrum: Spectrum) -> str:
        path = self._path(spectrum.provenance)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                _write_spectrum_stream(spectrum, fh)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return path

    def get_or_compute(self, hm: HoppingMatrix, provenance: dict) -> Spectrum:
        cached = self.load(provenance)
        if cached is not None:
            return cached
        spectrum = diagonalize(hm, provenance)
        self.store(spectrum)
        return spectrum


def _write_spectrum_stream(spectrum: Spectrum, fh) -> None:
    n = spectrum.n
    fh.write(CACHE_MAGIC)
    fh.write(struct.pack("<Q", n))
    fh.write(spectrum.energies.astype("<f8").tobytes())
    fh.write(np.ascontiguousarray(spectrum.states).astype("<c16").tobytes())
    blob = json.dumps(spectrum.provenance, sort_keys=True).encode()
    fh.write(struct.pack("<Q", len(blob)))
    fh.write(blob)


def write_spectrum(spectrum: Spectrum, path) -> None:
    with open(path, "wb") as fh:
        _write_spectrum_stream(spectrum, fh)


def read_spectrum(path) -> Spectrum:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CACHE_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {CACHE_MAGIC!r}")
        (n,) = struct.unpack("<Q", fh.read(8))
        energies = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64)
        states = (
            np.frombuffer(fh.read(16 * n * n), dtype="<c16")
            .reshape(n, n)
            .astype(np.complex128)
        )
        (blen,) = struct.unpack("<Q", fh.read(8))
        provenance = json.loads(fh.read(blen).decode())
    return Spectrum(energies=energies, states=states, provenance=provenance)
