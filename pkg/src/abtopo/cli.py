"""Command-line front end.

Subcommands: tiling, spectrum, butterfly, profiles, identify, pump, dos,
density-map, sweep-flux, sweep-radius. Every config key can come from a flat
key = value config file (--config) and be overridden by the flag of the same
name. Exit codes: 0 success, 1 usage/config error, 2 numerical-stage failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .config import RunConfig, load_config
from .hamiltonian import build_hofstadter, write_matrix
from .markers import CrosshairEngine, profile_from_lam, write_field_csv, write_profile_csv
from .pipeline import PipelineError, run_pipeline, sweep_flux, sweep_radius
from .pump import auto_count_radius, pump_chern, spectral_flow, write_events_csv, write_flow_csv
from .spectral import NumericalError, SpectrumCache, butterfly, density_of_states
from .tiling import cut_and_project, write_edge_list, write_site_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; reserve 2 for numerical
    # failures and use 1 for usage problems instead
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--r0", type=float, help="cutout radius")
    parser.add_argument("--phi", type=float, help="flux per square tile (flux quanta)")
    parser.add_argument("--x0", type=float, help="cutout center x")
    parser.add_argument("--y0", type=float, help="cutout center y")
    parser.add_argument("--seed", type=int, dest="base_seed", help="disorder base seed")
    parser.add_argument("--workers", type=int, help="process count (0 = auto)")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--reps", type=int, help="disorder realizations")
    parser.add_argument("--disorder-w", type=float, dest="disorder_w", help="disorder magnitude W")


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    overrides = {}
    for key in ("r0", "phi", "x0", "y0", "base_seed", "workers", "out_dir", "reps", "disorder_w"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return cfg.replace(**overrides) if overrides else cfg


def _out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _spectrum(cfg: RunConfig):
    graph = cut_and_project(cfg.system_spec())
    hm = build_hofstadter(graph, cfg.phi)
    cache = SpectrumCache(cfg.effective_cache_dir())
    provenance = {"kind": "clean", "spec": cfg.system_spec().key(), "n": graph.n_sites}
    return graph, hm, cache.get_or_compute(hm, provenance)


def cmd_tiling(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph = cut_and_project(cfg.system_spec())
    write_site_csv(graph, os.path.join(out, "sites.csv"))
    write_edge_list(graph, os.path.join(out, "edges.txt"))
    deg = graph.degrees
    print(
        f"N = {graph.n_sites}, edges = {len(graph.edges)}, "
        f"degree range {deg.min()}..{deg.max()}, wrote {out}/sites.csv, {out}/edges.txt"
    )
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph, hm, spectrum = _spectrum(cfg)
    if args.dump_matrix:
        write_matrix(hm, os.path.join(out, "hamiltonian.blth"))
    with open(os.path.join(out, "energies.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "energy"])
        for i, e in enumerate(spectrum.energies):
            writer.writerow([i, repr(float(e))])
    print(
        f"N = {spectrum.n}, E in [{spectrum.energies[0]:.6f}, {spectrum.energies[-1]:.6f}], "
        f"wrote {out}/energies.csv"
    )
    return EXIT_OK


def cmd_butterfly(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph = cut_and_project(cfg.system_spec())
    grid = np.linspace(0.0, 1.0, args.flux_steps)
    table = butterfly(graph, grid)
    path = os.path.join(out, "butterfly.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi", "index", "energy"])
        for g, phi in enumerate(grid):
            for i in range(table.shape[1]):
                writer.writerow([repr(float(phi)), i, repr(float(table[g, i]))])
    print(f"N = {graph.n_sites}, {len(grid)} flux values, wrote {path}")
    return EXIT_OK


def cmd_profiles(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph, hm, spectrum = _spectrum(cfg)
    engine = CrosshairEngine(spectrum, graph.positions)
    occupations = spectrum.fermi_occupations()
    if args.fermi_index:
        indices = args.fermi_index
    elif args.e_fermi is not None:
        indices = [spectrum.occupation_count(args.e_fermi) - 1]
    else:
        indices = list(range(spectrum.n))
    profiles = []
    for i in indices:
        if not 0 <= i < spectrum.n:
            print(f"fermi index {i} outside [0, {spectrum.n})", file=sys.stderr)
            return EXIT_USAGE
        field = engine.field(int(occupations[i]))
        lam = engine.lam_from_field(field)
        prof = profile_from_lam(i, engine.radii, lam)
        profiles.append(prof)
        if args.field:
            write_field_csv(field, graph, os.path.join(out, f"marker_field_{i}.csv"))
        print(f"E_{i} = {spectrum.energies[i]:.6f}: Q = {prof.q:.6f} at r = {prof.argmax_radius:.3f}")
    write_profile_csv(profiles, os.path.join(out, "profiles.csv"))
    print(f"wrote {out}/profiles.csv")
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _config_from_args(args)
    result = run_pipeline(cfg, log=print)
    print(f"report: {result.paths['report']}")
    return EXIT_OK


def cmd_pump(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph, hm, spectrum = _spectrum(cfg)
    e_f = args.e_fermi
    window = (e_f - args.window, e_f + args.window)
    flow = spectral_flow(
        hm,
        graph,
        energy_window=window,
        steps=cfg.pump_steps if args.steps is None else args.steps,
        overlap_floor=cfg.overlap_floor,
        min_step=cfg.pump_min_step,
    )
    radius = args.radius
    if radius is None:
        probe = pump_chern(flow, e_f)
        radius = auto_count_radius(probe.events)
        print(f"counting radius from the largest radial event gap: r = {radius:.3f}")
    result = pump_chern(flow, e_f, r=radius)
    write_flow_csv(flow, os.path.join(out, "flow.csv"))
    write_events_csv(result.events, os.path.join(out, "events.csv"))
    print(
        f"levels tracked = {flow.n_levels}, grid points = {len(flow.phi_grid)}, "
        f"endpoint deviation = {flow.endpoint_deviation:.3e}"
    )
    print(
        f"pumped charge C(r={radius:.3f}) = {result.chern}"
        + (" [AMBIGUOUS: hybridized link at the Fermi line]" if result.ambiguous else "")
    )
    print(f"wrote {out}/flow.csv, {out}/events.csv")
    return EXIT_OK


def cmd_dos(args) -> int:
    cfg = _config_from_args(args)
    out = _out(cfg)
    graph, hm, spectrum = _spectrum(cfg)
    eps = cfg.dos_width if cfg.dos_width > 0 else None
    curve = density_of_states(spectrum, eps)
    path = os.path.join(out, "dos.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["energy", "dos"])
        for e, v in zip(curve.grid, curve.values):
            writer.writerow([repr(float(e)), repr(float(v))])
    print(f"width eps = {curve.eps:.6g}, wrote {path}")
    return EXIT_OK


def cmd_density_map(args) -> int:
    cfg = _config_from_args(args)
    result = run_pipeline(cfg, log=print)
    census = result.report.edge_census
    print(f"edge census |S_psi| = {len(census)}")
    print(f"density map: {result.paths['density_map']}")
    return EXIT_OK


def cmd_sweep_flux(args) -> int:
    cfg = _config_from_args(args)
    phis = [float(p) for p in args.grid.split(",")] if args.grid else None
    result = sweep_flux(cfg, phis=phis, log=print if args.verbose else None)
    for row in result.rows:
        status = row.error or f"|S| = {row.n_candidates}, |S_B| = {row.n_blt}, |S_E| = {row.n_edge}"
        print(f"phi = {row.variable}: {status}")
    print(f"wrote {cfg.out_dir}/sweep_flux.csv")
    return EXIT_OK


def cmd_sweep_radius(args) -> int:
    cfg = _config_from_args(args)
    r0s = [float(p) for p in args.grid.split(",")] if args.grid else None
    result = sweep_radius(cfg, r0s=r0s, log=print if args.verbose else None)
    for row in result.rows:
        status = row.error or f"N = {row.n_sites}, |S_B| = {row.n_blt}, |S_E| = {row.n_edge}"
        print(f"r0 = {row.variable}: {status}")
    if "blt_vs_n" in result.fits:
        fit = result.fits["blt_vs_n"]
        print(
            f"|S_B| vs N fit: slope = {fit['slope']:.4f}, intercept = {fit['intercept']:.2f}, "
            f"r^2 = {fit['r2']:.4f}"
        )
    print(f"wrote {cfg.out_dir}/sweep_radius.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abtopo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
        return p

    add("tiling", cmd_tiling, "generate the tiling graph and write site/edge files")

    p = add("spectrum", cmd_spectrum, "diagonalize the clean Hamiltonian (cached)")
    p.add_argument("--dump-matrix", action="store_true", help="also write the Hamiltonian matrix")

    p = add("butterfly", cmd_butterfly, "eigenvalues over a flux grid")
    p.add_argument("--flux-steps", type=int, default=101, help="grid points over [0, 1]")

    p = add("profiles", cmd_profiles, "crosshair marker profiles")
    p.add_argument("--fermi-index", type=int, action="append", help="eigenindex (repeatable)")
    p.add_argument("--e-fermi", type=float, help="Fermi energy (picks the occupation)")
    p.add_argument("--field", action="store_true", help="also write per-site marker fields")

    add("identify", cmd_identify, "full identification pipeline (report.json)")

    p = add("pump", cmd_pump, "flux-tube charge pump around a Fermi energy")
    p.add_argument("--e-fermi", type=float, required=True, help="Fermi energy")
    p.add_argument("--window", type=float, default=0.15, help="tracked energy half-width")
    p.add_argument("--steps", type=int, help="base flux grid steps")
    p.add_argument(
        "--radius",
        type=float,
        help="counting radius (default: midpoint of the largest gap in crossing radii)",
    )

    add("dos", cmd_dos, "Lorentzian density of states")
    add("density-map", cmd_density_map, "BLT density map + edge census (runs the pipeline)")

    p = add("sweep-flux", cmd_sweep_flux, "pipeline per flux value")
    p.add_argument("--grid", help="comma-separated flux values (default: config flux_grid)")
    p.add_argument("--verbose", action="store_true")

    p = add("sweep-radius", cmd_sweep_radius, "pipeline per cutout radius")
    p.add_argument("--grid", help="comma-separated radii (default: config radius_grid)")
    p.add_argument("--verbose", action="store_true")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"abtopo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, PipelineError) as exc:
        print(f"abtopo: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
