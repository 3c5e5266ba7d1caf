"""End-to-end orchestration: generate -> diagonalize -> marker profiles ->
candidate selection -> disorder robustness -> classification -> grouping ->
edge census -> density map -> density of states, plus the flux and radius
sweep drivers. Every stage writes plot-ready CSV artifacts and the run ends
with a deterministic report.json (byte-identical across worker counts and
reruns with the same base seed)."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .hamiltonian import build_hofstadter
from .identification import (
    CandidateRecord,
    IdentificationReport,
    blt_density_map,
    classify,
    edge_census,
    group_blt,
    radial_measure,
    robustness,
    select_candidates,
    write_states_csv,
)
from .markers import CrosshairEngine, plateau_detect, profile_from_lam, write_profile_csv
from .spectral import Spectrum, SpectrumCache, density_of_states
from .tiling import TilingGraph, cut_and_project, write_edge_list, write_site_csv


class PipelineError(RuntimeError):
    """A pipeline stage failed; partial outputs for the run were removed."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    config: RunConfig
    graph: TilingGraph
    spectrum: Spectrum
    report: IdentificationReport
    lam_rows: dict[int, np.ndarray]   # candidate index -> cumulated-marker row
    marker_radii: np.ndarray
    out_dir: str
    paths: dict[str, str]
    timings: dict[str, float]


def run_dir_name(cfg: RunConfig) -> str:
    return f"r0_{cfg.r0!r}_phi_{cfg.phi!r}_x0_{cfg.x0!r}_y0_{cfg.y0!r}".replace("/", "_")


def report_json_bytes(report: IdentificationReport) -> bytes:
    """Canonical serialization: sorted keys, repr-exact floats, no timing or
    host-dependent data, so equal runs produce equal bytes."""
    return (json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n").encode()


def run_pipeline(cfg: RunConfig, out_dir: str | None = None, log=None) -> PipelineResult:
    cfg.validate()
    say = log or (lambda msg: None)
    spec = cfg.system_spec()
    out = out_dir or os.path.join(cfg.out_dir, run_dir_name(cfg))
    os.makedirs(out, exist_ok=True)
    cache = SpectrumCache(cfg.effective_cache_dir())

    written: list[str] = []
    timings: dict[str, float] = {}
    paths: dict[str, str] = {}

    def emit(name: str, filename: str, writer) -> None:
        path = os.path.join(out, filename)
        writer(path)
        written.append(path)
        paths[name] = path

    stage = "generate"
    try:
        t0 = time.perf_counter()
        graph = cut_and_project(spec)
        emit("sites", "sites.csv", lambda p: write_site_csv(graph, p))
        emit("edges", "edges.txt", lambda p: write_edge_list(graph, p))
        timings[stage] = time.perf_counter() - t0
        say(f"generate: N = {graph.n_sites} ({timings[stage]:.2f}s)")

        stage = "diagonalize"
        t0 = time.perf_counter()
        hm = build_hofstadter(graph, cfg.phi)
        provenance = {"kind": "clean", "spec": spec.key(), "n": graph.n_sites}
        spectrum = cache.get_or_compute(hm, provenance)
        timings[stage] = time.perf_counter() - t0
        say(f"diagonalize: {timings[stage]:.2f}s (cache dir {cache.directory})")

        stage = "profiles"
        t0 = time.perf_counter()
        engine = CrosshairEngine(spectrum, graph.positions)
        occupations = spectrum.fermi_occupations()
        # the clean Hamiltonian is bipartite-hopping only, so the chiral
        # shortcut (profile at N - k = negated profile at k) is exact
        lam = engine.all_lam(occupations=occupations, chiral=True)
        q_values = lam.max(axis=1) if lam.shape[1] else np.zeros(spectrum.n)
        timings[stage] = time.perf_counter() - t0
        say(f"profiles: {spectrum.n} Fermi levels ({timings[stage]:.2f}s)")

        stage = "candidates"
        t0 = time.perf_counter()
        candidates = select_candidates(q_values, cfg.candidate_eps)
        lam_rows = {i: lam[i] for i in candidates}
        cand_profiles = [
            profile_from_lam(i, engine.radii, lam_rows[i]) for i in sorted(candidates)
        ]
        emit("profiles", "profiles.csv", lambda p: write_profile_csv(cand_profiles, p))
        plateaus = {
            prof.fermi_index: plateau_detect(prof, cfg.plateau_eps, cfg.plateau_delta_r)
            for prof in cand_profiles
        }
        timings[stage] = time.perf_counter() - t0
        say(f"candidates: |S| = {len(candidates)}")

        stage = "robustness"
        t0 = time.perf_counter()
        rob = robustness(
            hm,
            graph.positions,
            spectrum.energies,
            candidates,
            w=cfg.disorder_w,
            reps=cfg.reps,
            base_seed=cfg.base_seed,
            workers=cfg.effective_workers(),
        )
        timings[stage] = time.perf_counter() - t0
        say(f"robustness: {cfg.reps} realizations ({timings[stage]:.2f}s)")

        stage = "classify"
        t0 = time.perf_counter()
        omega_r, a_max, radial_empty = radial_measure(
            lam_rows, engine.radii, candidates, cfg.area_margin
        )
        omega_q = {i: rob[i][2] for i in candidates}
        s_b, s_e, rejected = classify(
            candidates, omega_q, omega_r, cfg.omega_q_cut, cfg.omega_r_cut
        )
        timings[stage] = time.perf_counter() - t0

        stage = "groups"
        groups = group_blt(s_b, spectrum.energies, cfg.group_gap)

        stage = "census"
        t0 = time.perf_counter()
        census = edge_census(spectrum, graph)
        timings[stage] = time.perf_counter() - t0

        stage = "density-map"
        density = blt_density_map(spectrum, s_b)
        emit("density_map", "density_map.csv", lambda p: _write_density_csv(density, graph, p))

        stage = "dos"
        t0 = time.perf_counter()
        eps = cfg.dos_width if cfg.dos_width > 0 else None
        dos_full = density_of_states(spectrum, eps)
        dos_blt = density_of_states(spectrum, dos_full.eps, subset=s_b, grid=dos_full.grid)
        dos_edge = density_of_states(spectrum, dos_full.eps, subset=s_e, grid=dos_full.grid)
        emit("dos", "dos.csv", lambda p: _write_dos_csv(dos_full, dos_blt, dos_edge, p))
        timings[stage] = time.perf_counter() - t0

        stage = "report"
        records = []
        for i in sorted(candidates):
            mu, sigma, oq = rob[i]
            cls = "BLT" if i in s_b else ("edge" if i in s_e else "rejected")
            records.append(
                CandidateRecord(
                    index=i,
                    energy=float(spectrum.energies[i]),
                    q=float(q_values[i]),
                    n=candidates[i],
                    mu=mu,
                    sigma=sigma,
                    omega_q=oq,
                    a_max_radius=a_max[i],
                    omega_r=omega_r[i],
                    radial_empty=i in radial_empty,
                    cls=cls,
                )
            )
        report = IdentificationReport(
            spec_key=spec.key(),
            thresholds={
                "candidate_eps": cfg.candidate_eps,
                "omega_q_cut": cfg.omega_q_cut,
                "omega_r_cut": cfg.omega_r_cut,
                "area_margin": cfg.area_margin,
                "group_gap": cfg.group_gap,
                "plateau_eps": cfg.plateau_eps,
                "plateau_delta_r": cfg.plateau_delta_r,
                "disorder_w": cfg.disorder_w,
                "reps": cfg.reps,
                "base_seed": cfg.base_seed,
            },
            n_sites=graph.n_sites,
            records=records,
            s_b=s_b,
            s_e=s_e,
            rejected=rejected,
            groups=groups,
            edge_census=census,
            extras={
                "dos_width": dos_full.eps,
                "plateaus": {str(i): plateaus[i] for i in sorted(plateaus)},
            },
        )
        emit("states", "states.csv", lambda p: write_states_csv(records, p))
        blob = report_json_bytes(report)

        def _write_report(p):
            with open(p, "wb") as fh:
                fh.write(blob)

        emit("report", "report.json", _write_report)
        # timings are host-dependent, so they live outside report.json
        with open(os.path.join(out, "timings.json"), "w") as fh:
            json.dump(timings, fh, indent=1, sort_keys=True)
        paths["timings"] = os.path.join(out, "timings.json")
        say(
            f"done: |S| = {len(records)}, |S_B| = {len(s_b)}, |S_E| = {len(s_e)}, "
            f"|S_psi| = {len(census)}"
        )
        return PipelineResult(
            config=cfg,
            graph=graph,
            spectrum=spectrum,
            report=report,
            lam_rows=lam_rows,
            marker_radii=engine.radii,
            out_dir=out,
            paths=paths,
            timings=timings,
        )
    except Exception as exc:
        for path in written:
            if os.path.exists(path):
                os.unlink(path)
        raise PipelineError(stage, exc) from exc


def _write_density_csv(density: np.ndarray, graph: TilingGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "x", "y", "density"])
        for i in range(graph.n_sites):
            writer.writerow(
                [
                    i,
                    repr(float(graph.positions[i, 0])),
                    repr(float(graph.positions[i, 1])),
                    repr(float(density[i])),
                ]
            )


def _write_dos_csv(full, blt, edge, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["energy", "dos_full", "dos_blt", "dos_edge"])
        for j in range(len(full.grid)):
            writer.writerow(
                [
                    repr(float(full.grid[j])),
                    repr(float(full.values[j])),
                    repr(float(blt.values[j])),
                    repr(float(edge.values[j])),
                ]
            )


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class SweepRow:
    variable: float               # phi or r0
    n_sites: int = 0
    n_candidates: int = 0
    n_blt: int = 0
    n_edge: int = 0
    max_abs_n: int = 0
    error: str = ""


@dataclass
class SweepResult:
    rows: list[SweepRow]
    fits: dict = field(default_factory=dict)


def _pipeline_row(variable: float, result: PipelineResult) -> SweepRow:
    rep = result.report
    max_n = max((abs(r.n) for r in rep.records), default=0)
    return SweepRow(
        variable=variable,
        n_sites=rep.n_sites,
        n_candidates=len(rep.records),
        n_blt=len(rep.s_b),
        n_edge=len(rep.s_e),
        max_abs_n=max_n,
    )


def sweep_flux(cfg: RunConfig, phis=None, log=None) -> SweepResult:
    """Full pipeline per flux value; per-value failures are recorded in the
    row and the sweep continues."""
    say = log or (lambda msg: None)
    rows = []
    for phi in phis if phis is not None else cfg.flux_grid:
        try:
            res = run_pipeline(cfg.replace(phi=float(phi)), log=log)
            rows.append(_pipeline_row(float(phi), res))
            say(f"phi = {phi}: |S_B| = {rows[-1].n_blt}, |S_E| = {rows[-1].n_edge}")
        except PipelineError as exc:
            rows.append(SweepRow(variable=float(phi), error=str(exc)))
            say(f"phi = {phi}: FAILED ({exc})")
    out = SweepResult(rows=rows)
    _write_sweep(out, cfg, "phi", "sweep_flux")
    return out


def sweep_radius(cfg: RunConfig, r0s=None, log=None) -> SweepResult:
    """Full pipeline per cutout radius at fixed flux, with least-squares fits
    of |S_B| vs N (linear) and |S_E| vs N (log-log growth exponent)."""
    say = log or (lambda msg: None)
    rows = []
    for r0 in r0s if r0s is not None else cfg.radius_grid:
        try:
            res = run_pipeline(cfg.replace(r0=float(r0)), log=log)
            rows.append(_pipeline_row(float(r0), res))
            say(f"r0 = {r0}: N = {rows[-1].n_sites}, |S_B| = {rows[-1].n_blt}")
        except PipelineError as exc:
            rows.append(SweepRow(variable=float(r0), error=str(exc)))
            say(f"r0 = {r0}: FAILED ({exc})")
    out = SweepResult(rows=rows, fits=_radius_fits(rows))
    _write_sweep(out, cfg, "r0", "sweep_radius")
    return out


def linear_fit(x: np.ndarray, y: np.ndarray) -> dict:
    """Least-squares line with the coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def _radius_fits(rows: list[SweepRow]) -> dict:
    good = [r for r in rows if not r.error]
    fits: dict = {}
    if len(good) >= 2:
        n = np.array([r.n_sites for r in good], dtype=float)
        fits["blt_vs_n"] = linear_fit(n, [r.n_blt for r in good])
        edge = np.array([r.n_edge for r in good], dtype=float)
        if (edge > 0).all():
            # growth exponent: |S_E| ~ N^alpha, alpha < 1 means sublinear
            fits["edge_growth_exponent"] = linear_fit(np.log(n), np.log(edge))
        fits["edge_vs_n"] = linear_fit(n, edge)
    return fits


def _write_sweep(result: SweepResult, cfg: RunConfig, var_name: str, stem: str) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, stem + ".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([var_name, "n_sites", "S", "S_B", "S_E", "max_abs_n", "error"])
        for r in result.rows:
            writer.writerow(
                [repr(r.variable), r.n_sites, r.n_candidates, r.n_blt, r.n_edge, r.max_abs_n, r.error]
            )
    payload = {
        "rows": [
            {
                var_name: r.variable,
                "n_sites": r.n_sites,
                "S": r.n_candidates,
                "S_B": r.n_blt,
                "S_E": r.n_edge,
                "max_abs_n": r.max_abs_n,
                "error": r.error,
            }
            for r in result.rows
        ],
        "fits": result.fits,
    }
    with open(os.path.join(cfg.out_dir, stem + ".json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
