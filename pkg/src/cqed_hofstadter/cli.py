"""Command-line runner: JSON config in, CSV/JSON tables and a manifest out.

A config is a JSON object with a ``kind`` and its parameters, or an object
with a ``runs`` list of such objects. A ``manifest.json`` written by a
previous run is also accepted and reproduces that run.

Exit codes: 0 success, 1 error during the run, 2 invalid config.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from ._parallel import default_threads
from .drive import DecaySpec, PumpSpec, alpha_scan, momentum_scan, spectro_scan, steady_state
from .dynamics import chiral_metric, defect_run, evolve, snapshot_times
from .io import read_json, write_csv, write_json, write_table
from .lattice import DisorderSpec, LatticeSpec, lattice_hamiltonian, top_edge_sites
from .spectrum import butterfly, diagonalize, find_gaps
from .topology import (
    AmbiguousFlowError,
    chern_fhs,
    chern_numbers_diophantine,
    diophantine_windings,
    extract_winding,
    records_json,
)

KINDS = ("butterfly", "spectrum", "spectro", "momentum", "alpha", "dynamics", "chern")
T_MHZ = 10.0  # T / 2pi in MHz


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass
class RunConfig:
    """One experiment: its kind, parameters, output directory and seed."""

    kind: str
    params: dict = field(default_factory=dict)
    name: str = ""
    seed: int = 0
    units: str = "T"

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "seed": self.seed, "units": self.units, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        obj = copy.deepcopy(obj)
        kind = obj.pop("kind", "")
        name = obj.pop("name", "") or kind
        seed = obj.pop("seed", 0)
        units = obj.pop("units", "T")
        return cls(kind, obj, name, seed, units)


# ---------------------------------------------------------------- axes


def axis(spec: Any, name: str) -> np.ndarray:
    """Grid from a list, ``{"values": [...]}``, ``{"start", "stop", "step"}`` or ``{"start", "stop", "num"}``.

    ``step`` grids include ``stop`` when it lies on the grid; ``num`` grids
    are ``linspace`` and include both ends unless ``"endpoint": false``.
    """
    if isinstance(spec, (list, tuple)):
        g = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict) and "values" in spec:
        g = np.asarray(spec["values"], dtype=float)
    elif isinstance(spec, dict) and {"start", "stop", "num"} <= spec.keys():
        g = np.linspace(spec["start"], spec["stop"], int(spec["num"]), endpoint=spec.get("endpoint", True))
    elif isinstance(spec, dict) and {"start", "stop", "step"} <= spec.keys():
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if step <= 0:
            raise ConfigError([f"{name}: step must be positive"])
        n = int(math.floor((stop - start) / step + 1e-9)) + 1 if stop >= start else 0
        g = start + step * np.arange(n)
    else:
        raise ConfigError([f"{name}: cannot read grid {spec!r}"])
    if g.size == 0:
        raise ConfigError([f"empty axis: {name} grid has no points"])
    return g


def _scaled(spec: Any, factor: float, name: str) -> np.ndarray:
    return axis(spec, name) * factor


# ---------------------------------------------------------------- validation


def _lattice_fields(params: dict) -> dict:
    lat = dict(params.get("lattice", {}))
    if "offset" in lat:
        lat["offset"] = tuple(lat["offset"])
    return lat


def _sites(value: Any) -> list[tuple[int, int]]:
    return [(int(s[0]), int(s[1])) for s in value]


def validate(config: RunConfig | dict) -> list[str]:
    """Every problem with a config, not just the first."""
    if isinstance(config, dict):
        if "runs" in config:
            out = []
            for i, run in enumerate(config["runs"]):
                out += [f"runs[{i}]: {d}" for d in validate(run)]
            return out
        config = RunConfig.from_json(config)
    out: list[str] = []
    if config.kind not in KINDS:
        return [f"kind must be one of {', '.join(KINDS)}, got {config.kind!r}"]
    if config.units not in ("T", "MHz"):
        out.append(f"units must be 'T' or 'MHz', got {config.units!r}")
    if not (isinstance(config.seed, int) and 0 <= config.seed < 2**64):
        out.append(f"seed must be an unsigned 64-bit integer, got {config.seed!r}")
    p = config.params
    lat = _lattice_fields(p)
    lat_problems = LatticeSpec.diagnose(**lat)
    out += [f"lattice: {d}" for d in lat_problems]
    spec = None if lat_problems else LatticeSpec(**lat)
    if spec is None:
        # a bad flux alone should not hide geometry problems such as pump sites in the hole
        geometry = {k: v for k, v in lat.items() if k not in ("p", "q", "phi", "alpha")}
        if not LatticeSpec.diagnose(**geometry):
            spec = LatticeSpec(**geometry)

    def grid(key: str, required: bool = True) -> None:
        if key not in p:
            if required:
                out.append(f"missing {key} grid")
            return
        try:
            axis(p[key], key)
        except ConfigError as exc:
            out.extend(exc.diagnostics)

    def site_list(key: str) -> None:
        for s in p.get(key, []) if key != "site" else [p.get("site")]:
            if s is None:
                out.append(f"missing {key}")
                continue
            c = (int(s[0]), int(s[1]))
            if spec is not None and spec.in_vacancy(*c):
                out.append(f"pump site {c} lies inside the vacancy")
            elif spec is not None and not spec.is_active(*c):
                out.append(f"pump site {c} lies outside the {spec.Nx}x{spec.Ny} lattice")

    k = config.kind
    if k == "butterfly":
        if int(p.get("q_max", 0)) < 2:
            out.append("butterfly needs q_max >= 2")
        grid("phi_grid", required=False)
    elif k == "spectro":
        site_list("site")
        grid("omega")
        grid("steady_omegas", required=False)
    elif k == "momentum":
        if "sites" in p:
            site_list("sites")
        elif not p.get("m"):
            out.append("momentum needs sites or a list m of pump lengths")
        grid("k_p", required=False)
    elif k == "alpha":
        site_list("sites")
        grid("alpha")
        if "omega" not in p and "gap" not in p:
            out.append("alpha needs an omega grid or a gap index")
        grid("omega", required=False)
        grid("k_p", required=False)
    elif k == "dynamics":
        site_list("site")
        if "times" in p:
            grid("times")
        for key in ("hindrance",):
            for s in p.get(key, {}).get("sites", []):
                if spec is not None and not spec.is_active(int(s[0]), int(s[1])):
                    out.append(f"hindrance site {tuple(s)} is not an active site")
    elif k == "chern":
        for pq in p.get("fluxes", []):
            if len(pq) != 2 or math.gcd(int(pq[0]), int(pq[1])) != 1:
                out.append(f"flux {pq} violates gcd(p, q) = 1")
        if int(p.get("grid", 20)) < 6:
            out.append("chern grid must be at least 6")
    return out


# ---------------------------------------------------------------- runners


def _disorder(p: dict, seed: int) -> DisorderSpec | None:
    d = p.get("disorder")
    h = p.get("hindrance")
    if not d and not h:
        return None
    d = d or {}
    defects = tuple((tuple(s), float(h.get("detuning", 30.0))) for s in h["sites"]) if h else ()
    return DisorderSpec(float(d.get("sigma_diag", 0.0)), float(d.get("sigma_offdiag", 0.0)), int(seed), defects)


def _run_butterfly(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    spec = LatticeSpec(**_lattice_fields(p))
    extra = axis(p["phi_grid"], "phi_grid") if "phi_grid" in p else None
    table = butterfly(spec, int(p["q_max"]), extra, threads=threads)
    e_col = "energy_MHz" if cfg.units == "MHz" else "energy"
    table = table.copy()
    if cfg.units == "MHz":
        table[:, 2] *= T_MHZ
    return [write_table(out / "butterfly.csv", ["phi", "index", e_col], table, int_columns=["index"])]


def _run_spectrum(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    spec = LatticeSpec(**_lattice_fields(cfg.params))
    H = lattice_hamiltonian(spec, _disorder(cfg.params, cfg.seed))
    modes = diagonalize(H)
    f = T_MHZ if cfg.units == "MHz" else 1.0
    e_col = "energy_MHz" if cfg.units == "MHz" else "energy"
    files = [
        write_csv(out / "spectrum.csv", ["phi", "index", e_col],
                  ((spec.flux, i, e * f) for i, e in enumerate(modes.eigenvalues))),
        write_csv(out / "classification.csv", ["index", "tag", "w_outer", "w_inner", "w_bulk"],
                  ((i, t, *w) for i, (t, w) in enumerate(zip(modes.tags, modes.weights)))),
    ]
    if spec.rational and spec.q > 1:
        gaps = find_gaps(modes, spec.p, spec.q)
        files.append(write_json(out / "gaps.json", [
            {"h": g.h, "lower": g.lower * f, "upper": g.upper * f, "closed": g.closed} for g in gaps.gaps
        ]))
    return files


def _peaks_json(peaks, f: float) -> list[dict]:
    return [{"location": pk.location * f, "height": pk.height, "fwhm": pk.fwhm * f} for pk in peaks]


def _run_spectro(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    spec = LatticeSpec(**_lattice_fields(p))
    H = lattice_hamiltonian(spec, _disorder(p, cfg.seed))
    site = tuple(p["site"])
    decay = DecaySpec.for_pump(H, [site], p.get("kappa", 0.01), p.get("kappa_pump", 0.2))
    scan = spectro_scan(H, site, float(p["strength"]), axis(p["omega"], "omega"), decay,
                        method=p.get("method", "eig"), threads=threads)
    f = T_MHZ if cfg.units == "MHz" else 1.0
    w_col = "omega_MHz" if cfg.units == "MHz" else "omega"
    files = [
        write_csv(out / "spectro.csv", [w_col, "n_sp"], zip(scan.omegas * f, scan.values)),
        write_json(out / "peaks.json", {"site": list(site), "peaks": _peaks_json(scan.peaks, f)}),
    ]
    if "steady_omegas" in p:
        rows = []
        for w in axis(p["steady_omegas"], "steady_omegas"):
            ss = steady_state(H, PumpSpec.single(site, float(p["strength"]), float(w)), decay)
            rows += [(w * f, x, y, n) for (x, y), n in zip(H.index.coords, ss.photon_numbers)]
        files.append(write_csv(out / "steady.csv", [w_col, "x", "y", "photon_number"], rows))
    return files


def _run_momentum(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    spec = LatticeSpec(**_lattice_fields(p))
    H = lattice_hamiltonian(spec, _disorder(p, cfg.seed))
    kps = axis(p["k_p"], "k_p") if "k_p" in p else None
    site_sets = [_sites(p["sites"])] if "sites" in p else [top_edge_sites(int(m)) for m in p["m"]]
    rows, peaks = [], []
    for sites in site_sets:
        decay = DecaySpec.for_pump(H, sites, p.get("kappa", 0.01), p.get("kappa_pump", 0.2))
        sc = momentum_scan(H, sites, float(p["strength"]), float(p["omega"]), kps, decay)
        rows += [(k, sc.m, v) for k, v in zip(sc.kps, sc.values)]
        peaks.append({"m": sc.m, "sites": [list(s) for s in sites], "k_peak": sc.k_peak, "fwhm": sc.fwhm})
    return [
        write_csv(out / "momentum.csv", ["k_p", "m", "n_mp"], rows),
        write_json(out / "peaks.json", peaks),
    ]


def _run_alpha(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    spec = LatticeSpec(**_lattice_fields(p))
    window = None
    if "gap" in p:
        gap = find_gaps(diagonalize(lattice_hamiltonian(spec)), spec.p, spec.q)[int(p["gap"])]
        window = gap.interior(float(p.get("interior", 0.8)))
    if "omega" in p:
        omegas = axis(p["omega"], "omega")
    else:
        pad, step = float(p.get("pad", 0.05)), float(p.get("omega_step", 0.0025))
        omegas = axis({"start": window[0] - pad, "stop": window[1] + pad, "step": step}, "omega")
    kps = axis(p["k_p"], "k_p") if "k_p" in p else None
    sites = _sites(p["sites"])
    scan = alpha_scan(spec, sites, float(p["strength"]), axis(p["alpha"], "alpha"), omegas, kps,
                      _disorder(p, cfg.seed), p.get("kappa", 0.01), p.get("kappa_pump", 0.2),
                      threads=threads)
    f = T_MHZ if cfg.units == "MHz" else 1.0
    w_col = "omega_MHz" if cfg.units == "MHz" else "omega"
    env = scan.envelope()
    files = [
        write_csv(out / "alpha.csv", ["alpha", w_col, "n_mp"],
                  ((a, w * f, env[i, j]) for i, a in enumerate(scan.alphas) for j, w in enumerate(scan.omegas))),
        write_csv(out / "alpha_k.csv", ["alpha", w_col, "k_p", "n_mp"],
                  ((a, w * f, k, scan.values[i, j, l])
                   for i, a in enumerate(scan.alphas)
                   for j, w in enumerate(scan.omegas)
                   for l, k in enumerate(scan.kps))),
    ]
    if window is not None:
        try:
            est = extract_winding(scan, window)
            rec = {"gap": int(p["gap"]), "t": est.t, "flow": est.flow,
                   "window": [w * f for w in est.window], "peaks_per_frame": list(est.peaks_per_frame)}
        except AmbiguousFlowError as exc:
            rec = {"gap": int(p["gap"]), "t": None, "error": str(exc)}
        files.append(write_json(out / "winding.json", rec))
    return files


def _run_dynamics(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    spec = LatticeSpec(**_lattice_fields(p))
    H = lattice_hamiltonian(spec, _disorder(p, cfg.seed))
    site = tuple(p["site"])
    pump = PumpSpec.single(site, float(p["strength"]), float(p["omega"]))
    decay = DecaySpec.for_pump(H, [site], p.get("kappa", 0.01), p.get("kappa_pump", 0.2))
    if "times" in p:
        times = axis(p["times"], "times")
    else:
        sn = p.get("snapshots", {"first": 6.0, "step": 13.0, "count": 5})
        times = snapshot_times(float(sn["first"]), float(sn["step"]), int(sn["count"]))
    edge = p.get("edge", "outer")
    probe = axis(p.get("metric_times", {"start": 0.0, "stop": 40.0, "step": 1.0}), "metric_times")
    f_t = 1.0 / (2.0 * math.pi * T_MHZ) if cfg.units == "MHz" else 1.0
    t_col = "t_us" if cfg.units == "MHz" else "t"
    files = []
    summary: dict[str, Any] = {"edge": edge}
    if "hindrance" in p:
        sites = _sites(p["hindrance"]["sites"])
        _, rep = defect_run(H, pump, decay, probe, sites)
        summary.update(direction=rep.direction,
                       hindrance_fraction_max=float(rep.hindrance_fraction.max()),
                       downstream_fraction_max=float(rep.downstream_fraction.max()))
    else:
        metric = chiral_metric(evolve(H, pump, decay, probe, threads=threads), edge)
        summary.update(direction=metric.direction, angular_velocity=metric.angular_velocity / f_t)
    traj = evolve(H, pump, decay, times, threads=threads)
    rows = ((t * f_t, x, y, n)
            for t, snap in zip(traj.times, traj.photon_numbers)
            for (x, y), n in zip(H.index.coords, snap))
    files.append(write_csv(out / "trajectory.csv", [t_col, "x", "y", "photon_number"], rows))
    files.append(write_json(out / "chiral.json", summary))
    return files


def _run_chern(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    p = cfg.params
    if "fluxes" in p:
        fluxes = [(int(a), int(b)) for a, b in p["fluxes"]]
    else:
        from .spectrum import coprime_fluxes

        fluxes = [pq for pq in coprime_fluxes(int(p.get("q_max", 8))) if pq[1] > 1]
    grid = int(p.get("grid", 20))
    records = []
    for pp, q in fluxes:
        records += records_json(chern_numbers_diophantine(pp, q), diophantine_windings(pp, q))
        records += records_json(chern_fhs(pp, q, grid, merge_touching=True, threads=threads))
    return [write_json(out / "chern.json", records)]


RUNNERS = {
    "butterfly": _run_butterfly,
    "spectrum": _run_spectrum,
    "spectro": _run_spectro,
    "momentum": _run_momentum,
    "alpha": _run_alpha,
    "dynamics": _run_dynamics,
    "chern": _run_chern,
}


# ---------------------------------------------------------------- orchestration


def load_config(path: str | Path) -> dict:
    """Read a config, a recipe name, or a manifest written by a previous run."""
    p = Path(path)
    if not p.exists():
        recipe = resources.files("cqed_hofstadter") / "recipes" / f"{path}.json"
        if not recipe.is_file():
            raise FileNotFoundError(f"no config file or recipe named {path!r}")
        obj = json.loads(recipe.read_text())
    else:
        obj = read_json(p)
    if isinstance(obj, dict) and "config" in obj and "library_version" in obj:
        obj = obj["config"]
    return obj


def _apply_overrides(obj: dict, seed: int | None, units: str | None) -> dict:
    obj = copy.deepcopy(obj)
    targets = obj["runs"] if "runs" in obj else [obj]
    for run in targets:
        if seed is not None:
            run["seed"] = seed
        if units is not None:
            run["units"] = units
    return obj


def run(obj: dict, out: Path, threads: int | None = None) -> int:
    """Execute a config object, writing tables and ``manifest.json`` under ``out``."""
    out = Path(out)
    diagnostics = validate(obj)
    if diagnostics:
        _error(out, "config", diagnostics)
        return 2
    threads = default_threads() if threads is None else threads
    runs = obj["runs"] if "runs" in obj else [obj]
    started = time.perf_counter()
    written: list[str] = []
    try:
        with threadpool_limits(limits=1):
            for raw in runs:
                cfg = RunConfig.from_json(raw)
                target = out / cfg.name if "runs" in obj else out
                for f in RUNNERS[cfg.kind](cfg, target, threads):
                    written.append(str(f.relative_to(out)))
    except Exception as exc:  # module errors become a machine-readable record
        _error(out, type(exc).__name__, [str(exc)])
        return 1
    write_json(out / "manifest.json", {
        "config": obj,
        "library_version": __version__,
        "wall_time_s": time.perf_counter() - started,
        "threads": threads,
        "files": written,
    })
    return 0


def _error(out: Path, kind: str, messages: list[str]) -> None:
    record = {"error": kind, "messages": messages}
    print(json.dumps(record), file=sys.stderr)
    try:
        write_json(Path(out) / "error.json", record)
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cqed-hofstadter",
        description="Run a lattice experiment from a JSON config, recipe name or previous manifest.",
    )
    parser.add_argument("recipe", nargs="?", help="recipe name (fig2 ... fig6) or config path")
    parser.add_argument("--config", help="config or manifest JSON file")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $CQED_HOFSTADTER_THREADS or 1)")
    parser.add_argument("--seed", type=int, default=None, help="disorder seed, overrides the config")
    parser.add_argument("--units", choices=("T", "MHz"), default=None,
                        help="output energies in units of T or in MHz (T/2pi = 10 MHz)")
    parser.add_argument("--validate", action="store_true", help="only print diagnostics")
    args = parser.parse_args(argv)

    source = args.config or args.recipe
    if source is None:
        parser.error("give a recipe name or --config")
    if args.threads is not None and args.threads < 1:
        _error(Path(args.out), "config", [f"--threads must be positive, got {args.threads}"])
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        _error(Path(args.out), "config", [f"--seed must fit in 64 unsigned bits, got {args.seed}"])
        return 2
    try:
        obj = _apply_overrides(load_config(source), args.seed, args.units)
    except (OSError, ValueError) as exc:
        _error(Path(args.out), "config", [str(exc)])
        return 2
    if args.validate:
        diags = validate(obj)
        print(json.dumps(diags, indent=2))
        return 2 if diags else 0
    try:
        return run(obj, Path(args.out), args.threads)
    except ConfigError as exc:
        _error(Path(args.out), "config", exc.diagnostics)
        return 2


if __name__ == "__main__":
    sys.exit(main())
