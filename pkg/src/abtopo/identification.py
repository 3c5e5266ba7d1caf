"""Classification pipeline: candidate selection by the cumulated marker,
disorder-robustness statistics, radial localization, BLT/edge classes,
energy-grouping, an independent edge census, and the BLT density map."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import HoppingMatrix, apply_disorder
from .markers import CrosshairEngine
from .spectral import Spectrum, diagonalize
from .tiling import TilingGraph

CANDIDATE_EPS = 0.01
OMEGA_Q_CUT = 0.05
OMEGA_R_CUT = 0.97
RADIAL_MARGIN = 0.05
GROUP_GAP = 0.01
ROBUSTNESS_REPS = 200
CALIBRATION_REPS = 50
DISORDER_W = 0.3
EDGE_RADIAL_CUT = 0.97
EDGE_QUADRANT_CUT = 0.2


@dataclass
class CandidateRecord:
    index: int
    energy: float
    q: float
    n: int
    mu: float = float("nan")
    sigma: float = float("nan")
    omega_q: float = float("nan")
    a_max_radius: float = float("nan")
    omega_r: float = float("nan")
    radial_empty: bool = False
    cls: str = "rejected"        # "BLT" | "edge" | "rejected"


@dataclass
class BltGroup:
    members: list[int]           # consecutive eigenindices
    delta_e: float               # span between the bordering non-members
    qualifies: bool
    truncated: bool = False      # a border fell off the spectrum end


def select_candidates(q_values: np.ndarray, eps: float = CANDIDATE_EPS) -> dict[int, int]:
    """Indices whose Q lies within eps of a nonzero integer, with that integer."""
    out: dict[int, int] = {}
    for i, q in enumerate(q_values):
        n = int(np.rint(q))
        if n != 0 and abs(q - n) < eps:
            out[i] = n
    return out


def realization_seed(base_seed: int, realization: int) -> int:
    """Scheduling-independent per-realization RNG seed."""
    return int(np.random.SeedSequence([int(base_seed), int(realization)]).generate_state(1)[0])


def disorder_q(
    hm_clean: HoppingMatrix,
    positions: np.ndarray,
    clean_energies: np.ndarray,
    indices: np.ndarray,
    w: float,
    seed: int,
) -> np.ndarray:
    """Q_dis(E_i) for one disorder realization: occupation thresholds come from
    the clean eigenvalues, the occupied subspace from the disordered one."""
    spectrum = diagonalize(apply_disorder(hm_clean, w, seed))
    engine = CrosshairEngine(spectrum, positions)
    out = np.empty(len(indices))
    for j, i in enumerate(indices):
        k = int(np.searchsorted(spectrum.energies, clean_energies[i], side="right"))
        lam = engine.lam_from_field(engine.field(k))
        out[j] = lam.max() if len(lam) else 0.0
    return out


# Worker-side state for process pools; populated on fork via the initializer.
_WORK: dict = {}


def _init_disorder_worker(matrix, positions, clean_energies, indices, w, base_seed):
    _WORK.update(
        matrix=matrix,
        positions=positions,
        clean_energies=clean_energies,
        indices=indices,
        w=w,
        base_seed=base_seed,
    )


def _one_disorder_realization(rep: int) -> np.ndarray:
    return disorder_q(
        HoppingMatrix(matrix=_WORK["matrix"]),
        _WORK["positions"],
        _WORK["clean_energies"],
        _WORK["indices"],
        _WORK["w"],
        realization_seed(_WORK["base_seed"], rep),
    )


def _disorder_q_table(
    hm_clean, positions, clean_energies, indices, w, reps, base_seed, workers=1
) -> np.ndarray:
    """(reps, len(indices)) table of Q_dis values; row order is the realization
    index, so results are identical for any worker count."""
    indices = np.asarray(indices, dtype=int)
    table = np.empty((reps, len(indices)))
    if workers <= 1:
        for rep in range(reps):
            table[rep] = disorder_q(
                hm_clean, positions, clean_energies, indices, w, realization_seed(base_seed, rep)
            )
        return table
    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_init_disorder_worker,
        initargs=(hm_clean.matrix, positions, clean_energies, indices, w, base_seed),
    ) as pool:
        for rep, row in enumerate(pool.map(_one_disorder_realization, range(reps))):
            table[rep] = row
    return table


def calibrate_disorder(
    hm_clean: HoppingMatrix,
    positions: np.ndarray,
    clean_energies: np.ndarray,
    sample_indices,
    w_grid,
    reps: int = CALIBRATION_REPS,
    base_seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Mean Q_dis per sampled state (rows) per disorder magnitude (columns);
    a human picks the operating W from these curves."""
    sample_indices = np.asarray(sample_indices, dtype=int)
    out = np.empty((len(sample_indices), len(w_grid)))
    for c, w in enumerate(w_grid):
        if w == 0.0:
            # no disorder drawn; single clean evaluation
            out[:, c] = disorder_q(hm_clean, positions, clean_energies, sample_indices, 0.0, 0)
            continue
        table = _disorder_q_table(
            hm_clean, positions, clean_energies, sample_indices, w, reps, base_seed, workers
        )
        out[:, c] = table.mean(axis=0)
    return out


def robustness(
    hm_clean: HoppingMatrix,
    positions: np.ndarray,
    clean_energies: np.ndarray,
    candidates: dict[int, int],
    w: float = DISORDER_W,
    reps: int = ROBUSTNESS_REPS,
    base_seed: int = 0,
    workers: int = 1,
) -> dict[int, tuple[float, float, float]]:
    """Per candidate: (mu, sigma, omega_q) over `reps` disorder realizations.

    sigma is the population standard deviation; omega_q = |n - mu| + sigma
    with n the clean-system integer match."""
    indices = np.array(sorted(candidates), dtype=int)
    if len(indices) == 0:
        return {}
    table = _disorder_q_table(
        hm_clean, positions, clean_energies, indices, w, reps, base_seed, workers
    )
    mu = table.mean(axis=0)
    sigma = table.std(axis=0)  # population std
    out = {}
    for j, i in enumerate(indices):
        n = candidates[int(i)]
        out[int(i)] = (float(mu[j]), float(sigma[j]), float(abs(n - mu[j]) + sigma[j]))
    return out


def radial_measure(
    lam_rows: dict[int, np.ndarray],
    radii: np.ndarray,
    candidates: dict[int, int],
    margin: float = RADIAL_MARGIN,
) -> tuple[dict[int, float], dict[int, float], set[int]]:
    """(omega_r, a_max_radius, empty_flags) for each candidate.

    A_i is where lam stays above n_i - margin (below n_i + margin for
    negative n_i, the chiral-mirrored threshold); omega_r normalizes max A_i
    by the largest max over candidates sharing the same integer."""
    a_max: dict[int, float] = {}
    empty: set[int] = set()
    for i, n in candidates.items():
        lam = lam_rows[i]
        mask = lam > n - margin if n > 0 else lam < n + margin
        if mask.any():
            a_max[i] = float(radii[mask].max())
        else:
            a_max[i] = 0.0
            empty.add(i)
    group_max: dict[int, float] = {}
    for i, n in candidates.items():
        group_max[n] = max(group_max.get(n, 0.0), a_max[i])
    omega_r = {}
    for i, n in candidates.items():
        omega_r[i] = a_max[i] / group_max[n] if group_max[n] > 0 else 1.0
    return omega_r, a_max, empty


def classify(
    candidates: dict[int, int],
    omega_q: dict[int, float],
    omega_r: dict[int, float],
    q_cut: float = OMEGA_Q_CUT,
    r_cut: float = OMEGA_R_CUT,
) -> tuple[list[int], list[int], list[int]]:
    """(S_B, S_E, rejected); the exact r_cut tie is rejected (strict
    inequalities on both sides)."""
    s_b, s_e, rejected = [], [], []
    for i in sorted(candidates):
        if omega_q[i] < q_cut:
            if omega_r[i] < r_cut:
                s_b.append(i)
                continue
            if omega_r[i] > r_cut:
                s_e.append(i)
                continue
        rejected.append(i)
    return s_b, s_e, rejected


def group_blt(s_b, energies: np.ndarray, gap: float = GROUP_GAP) -> list[BltGroup]:
    """Maximal consecutive-eigenindex runs of S_B with their energy spans;
    a group qualifies when delta_e > gap."""
    s_b = sorted(s_b)
    n = len(energies)
    groups: list[BltGroup] = []
    run: list[int] = []
    for i in s_b + [None]:
        if run and (i is None or i != run[-1] + 1):
            lo, hi = run[0] - 1, run[-1] + 1
            truncated = lo < 0 or hi >= n
            e_lo = energies[lo] if lo >= 0 else energies[run[0]]
            e_hi = energies[hi] if hi < n else energies[run[-1]]
            delta_e = float(e_hi - e_lo)
            groups.append(
                BltGroup(members=list(run), delta_e=delta_e, qualifies=delta_e > gap, truncated=truncated)
            )
            run = []
        if i is not None:
            run.append(i)
    return groups


def edge_census(
    spectrum: Spectrum,
    graph: TilingGraph,
    radial_cut: float = EDGE_RADIAL_CUT,
    quadrant_cut: float = EDGE_QUADRANT_CUT,
) -> list[int]:
    """States localized near the boundary in all four quadrants: the
    wavefunction-based counterpart of the topological edge set."""
    density = np.abs(spectrum.states) ** 2  # (site, state)
    radii = graph.radii
    expect_r = radii @ density
    m_r = expect_r / expect_r.max()
    x, y = graph.positions[:, 0], graph.positions[:, 1]
    quadrant_ok = np.ones(spectrum.n, dtype=bool)
    for m in (1, 2, 3, 4):
        sx = np.sign(np.cos(m * np.pi / 2 - np.pi / 4))
        sy = np.sign(np.sin(m * np.pi / 2 - np.pi / 4))
        mask = ((sx * x >= 0.0) & (sy * y >= 0.0)).astype(float)
        quadrant_ok &= (mask @ density) > quadrant_cut
    return [int(i) for i in np.flatnonzero((m_r > radial_cut) & quadrant_ok)]


def blt_density_map(spectrum: Spectrum, s_b) -> np.ndarray:
    """Summed probability density of the BLT states per site."""
    s_b = np.asarray(sorted(s_b), dtype=int)
    if len(s_b) == 0:
        return np.zeros(spectrum.n)
    return np.sum(np.abs(spectrum.states[:, s_b]) ** 2, axis=1)


# ---------------------------------------------------------------------------
# Report emission


@dataclass
class IdentificationReport:
    spec_key: str
    thresholds: dict
    n_sites: int
    records: list[CandidateRecord]
    s_b: list[int]
    s_e: list[int]
    rejected: list[int]
    groups: list[BltGroup]
    edge_census: list[int]
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec_key,
            "thresholds": self.thresholds,
            "n_sites": self.n_sites,
            "counts": {
                "S": len(self.records),
                "S_B": len(self.s_b),
                "S_E": len(self.s_e),
                "S_psi": len(self.edge_census),
            },
            "S_B": self.s_b,
            "S_E": self.s_e,
            "rejected": self.rejected,
            "S_psi": self.edge_census,
            "states": [
                {
                    "index": r.index,
                    "energy": r.energy,
                    "Q": r.q,
                    "n": r.n,
                    "mu": r.mu,
                    "sigma": r.sigma,
                    "omega_q": r.omega_q,
                    "omega_r": r.omega_r,
                    "a_max_radius": r.a_max_radius,
                    "radial_empty": r.radial_empty,
                    "class": r.cls,
                }
                for r in self.records
            ],
            "groups": [
                {
                    "members": g.members,
                    "delta_e": g.delta_e,
                    "qualifies": g.qualifies,
                    "truncated": g.truncated,
                }
                for g in self.groups
            ],
            **self.extras,
        }


def write_states_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "energy", "Q", "n", "mu", "sigma", "omega_q", "omega_r", "class"]
        )
        for r in records:
            writer.writerow(
                [
                    r.index,
                    repr(r.energy),
                    repr(r.q),
                    r.n,
                    repr(r.mu),
                    repr(r.sigma),
                    repr(r.omega_q),
                    repr(r.omega_r),
                    r.cls,
                ]
            )
