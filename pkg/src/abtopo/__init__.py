"""Hofstadter models on Ammann-Beenker quasicrystal cutouts: real-space
topological markers, BLT/edge-state identification, and flux-tube charge
pumping."""

from .config import RunConfig, load_config
from .hamiltonian import HoppingMatrix, apply_disorder, build_hofstadter, flux_tube_phases
from .markers import CrosshairEngine, CrosshairProfile, plateau_detect
from .pipeline import PipelineError, PipelineResult, run_pipeline, sweep_flux, sweep_radius
from .pump import PumpFlow, PumpResult, auto_count_radius, pump_chern, spectral_flow
from .spectral import Spectrum, SpectrumCache, density_of_states, diagonalize
from .tiling import SystemSpec, TilingGraph, cut_and_project, square_lattice_disk

__version__ = "1.0.0"

__all__ = [
    "RunConfig",
    "load_config",
    "HoppingMatrix",
    "apply_disorder",
    "build_hofstadter",
    "flux_tube_phases",
    "CrosshairEngine",
    "CrosshairProfile",
    "plateau_detect",
    "PipelineError",
    "PipelineResult",
    "run_pipeline",
    "sweep_flux",
    "sweep_radius",
    "PumpFlow",
    "PumpResult",
    "auto_count_radius",
    "pump_chern",
    "spectral_flow",
    "Spectrum",
    "SpectrumCache",
    "density_of_states",
    "diagonalize",
    "SystemSpec",
    "TilingGraph",
    "cut_and_project",
    "square_lattice_disk",
    "__version__",
]
