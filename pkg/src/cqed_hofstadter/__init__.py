"""Hofstadter lattice of coupled microwave resonators: spectra, drives and topology."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .lattice import (
    DisorderSpec,
    GaugeField,
    Hamiltonian,
    LatticeSpec,
    SiteIndex,
    build_gauge,
    build_hamiltonian,
    edge_loop,
    edge_sets,
    lattice_hamiltonian,
)
from .spectrum import GapTable, ModeSet, butterfly, diagonalize, find_gaps
from .topology import (
    ChernRecord,
    WindingRecord,
    chern_fhs,
    chern_from_windings,
    diophantine_winding,
    extract_winding,
)
from .drive import (
    AlphaScan,
    DecaySpec,
    MomentumScan,
    PumpSpec,
    SpectroScan,
    SteadyState,
    alpha_scan,
    momentum_scan,
    spectro_scan,
    steady_state,
)
from .dynamics import ChiralMetric, Trajectory, chiral_metric, defect_run, evolve

__all__ = [
    "AlphaScan", "ChernRecord", "ChiralMetric", "DecaySpec", "DisorderSpec", "GapTable",
    "GaugeField", "Hamiltonian", "LatticeSpec", "ModeSet", "MomentumScan", "PumpSpec",
    "SiteIndex", "SpectroScan", "SteadyState", "Trajectory", "WindingRecord",
    "alpha_scan", "build_gauge", "build_hamiltonian", "butterfly", "chern_fhs",
    "chern_from_windings", "chiral_metric", "defect_run", "diagonalize",
    "diophantine_winding", "edge_loop", "edge_sets", "evolve", "extract_winding",
    "find_gaps", "lattice_hamiltonian", "momentum_scan", "spectro_scan", "steady_state",
]
