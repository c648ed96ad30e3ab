"""Driven-dissipative steady states and the three pumping protocols.

The coherent amplitudes obey ``i da/dt = (B - Omega - i K/2) a + P``. The
steady state is ``a = -(B - Omega - i K/2)^{-1} P`` and the photon number on
site ``r`` is ``|a_r|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from ._parallel import ordered_map
from .lattice import Coord, DisorderSpec, Hamiltonian, LatticeSpec, edge_loop, lattice_hamiltonian
from .peaks import Peak, find_trace_peaks

REGULAR_KAPPA = 0.01
PUMP_KAPPA = 0.2


class DriveError(ValueError):
    """Invalid pump or decay definition."""


@dataclass(frozen=True)
class DecaySpec:
    """Per-site loss rates ``kappa`` in dense-id order."""

    kappa: np.ndarray

    def __post_init__(self) -> None:
        k = np.array(self.kappa, dtype=float)
        if k.ndim != 1:
            raise DriveError("kappa must be a vector")
        if not np.all(k > 0):
            bad = np.flatnonzero(~(k > 0))
            raise DriveError(f"every kappa must be positive; site ids {bad[:10].tolist()} are not")
        k.setflags(write=False)
        object.__setattr__(self, "kappa", k)

    @classmethod
    def for_pump(
        cls,
        H: Hamiltonian,
        pump_sites: Sequence[Coord],
        regular: float = REGULAR_KAPPA,
        pumped: float = PUMP_KAPPA,
    ) -> "DecaySpec":
        """Uniform ``regular`` loss with ``pumped`` on every pumped site."""
        k = np.full(H.n_sites, float(regular))
        k[H.index.ids(pump_sites)] = pumped
        return cls(k)


@dataclass(frozen=True)
class PumpSpec:
    """Coherent drive amplitudes on a set of sites at detuning ``omega``."""

    entries: tuple[tuple[Coord, complex], ...]
    omega: float

    @classmethod
    def single(cls, site: Coord, strength: float, omega: float) -> "PumpSpec":
        return cls((((int(site[0]), int(site[1])), complex(strength)),), float(omega))

    @classmethod
    def phase_gradient(cls, sites: Sequence[Coord], strength: float, k_p: float, omega: float) -> "PumpSpec":
        """Equal-strength pump with phase ``j * k_p`` on the ``j``-th site, ``j = 1..m``."""
        return cls(
            tuple(
                ((int(s[0]), int(s[1])), complex(strength * np.exp(1j * j * k_p)))
                for j, s in enumerate(sites, start=1)
            ),
            float(omega),
        )

    @property
    def sites(self) -> list[Coord]:
        return [c for c, _ in self.entries]

    def amplitudes(self) -> np.ndarray:
        return np.array([a for _, a in self.entries], dtype=np.complex128)

    def vector(self, H: Hamiltonian) -> np.ndarray:
        bad = [c for c in self.sites if c not in H.index]
        if bad:
            raise DriveError(f"pump site(s) {bad} are not active lattice sites")
        P = np.zeros(H.n_sites, dtype=np.complex128)
        np.add.at(P, H.index.ids(self.sites), self.amplitudes())
        return P


@dataclass(frozen=True)
class SteadyState:
    amplitudes: np.ndarray
    residual: float

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def dynamical_matrix(H: Hamiltonian, decay: DecaySpec, omega: float) -> np.ndarray:
    """``B - Omega - i K/2``."""
    A = np.array(H.matrix, dtype=np.complex128)
    A[np.diag_indices_from(A)] += -omega - 0.5j * decay.kappa
    return A


def steady_state(
    H: Hamiltonian,
    pump: PumpSpec,
    decay: DecaySpec,
    method: str = "lu",
    rtol: float = 1e-9,
) -> SteadyState:
    """Steady-state amplitudes by direct solve (``lu``) or spectral resolvent (``eig``).

    Raises if the residual exceeds ``rtol * ||P||``.
    """
    if len(decay.kappa) != H.n_sites:
        raise DriveError(f"decay has {len(decay.kappa)} rates for {H.n_sites} sites")
    P = pump.vector(H)
    A = dynamical_matrix(H, decay, pump.omega)
    if method == "lu":
        a = -scipy.linalg.solve(A, P, check_finite=False)
    elif method == "eig":
        lam, V = scipy.linalg.eig(A)
        a = -V @ (scipy.linalg.solve(V, P) / lam)
    else:
        raise DriveError(f"method must be 'lu' or 'eig', got {method!r}")
    res = float(np.linalg.norm(A @ a + P))
    norm = float(np.linalg.norm(P))
    if res > rtol * max(norm, np.finfo(float).tiny) and norm > 0:
        raise np.linalg.LinAlgError(f"steady-state residual {res:.3g} exceeds {rtol:g} * |P| = {rtol * norm:.3g}")
    return SteadyState(a, res)


def power_balance(H: Hamiltonian, pump: PumpSpec, decay: DecaySpec, state: SteadyState) -> tuple[float, float]:
    """``(sum kappa |a|^2, -2 Im(P^dag a))``; equal in any steady state."""
    P = pump.vector(H)
    a = state.amplitudes
    return float(np.sum(decay.kappa * np.abs(a) ** 2)), float(-2.0 * np.imag(np.vdot(P, a)))


class Resolvent:
    """Response block ``-(B - Omega - i K/2)^{-1}`` restricted to a set of sites.

    ``method='eig'`` diagonalizes ``B - i K/2`` once and evaluates every
    frequency in ``O(N m)``; ``method='lu'`` factorizes afresh per frequency.
    The two are independent routes to the same numbers.
    """

    def __init__(self, H: Hamiltonian, decay: DecaySpec, sites: Sequence[Coord], method: str = "eig"):
        if method not in ("eig", "lu"):
            raise DriveError(f"method must be 'lu' or 'eig', got {method!r}")
        self.H, self.decay, self.method = H, decay, method
        self.ids = H.index.ids(sites)
        if method == "eig":
            A = dynamical_matrix(H, decay, 0.0)
            lam, V = scipy.linalg.eig(A)
            self._lam = lam
            self._right = V[self.ids, :]
            self._left = scipy.linalg.solve(V, np.eye(H.n_sites)[:, self.ids])

    def block(self, omega: float) -> np.ndarray:
        """``m x m`` map from pump amplitudes to steady amplitudes on the same sites."""
        if self.method == "eig":
            return -(self._right / (self._lam - omega)) @ self._left
        A = dynamical_matrix(self.H, self.decay, omega)
        rhs = np.zeros((self.H.n_sites, len(self.ids)), dtype=np.complex128)
        rhs[self.ids, np.arange(len(self.ids))] = 1.0
        return -scipy.linalg.lu_solve(scipy.linalg.lu_factor(A, check_finite=False), rhs)[self.ids]


def _check_grid(name: str, grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise DriveError(f"empty axis: {name} grid has no points")
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise DriveError(f"{name} grid must be strictly increasing")
    return g


@dataclass(frozen=True)
class SpectroScan:
    """Pump-site photon number versus detuning for a single-site pump."""

    site: Coord
    strength: float
    omegas: np.ndarray
    values: np.ndarray
    peaks: tuple[Peak, ...]

    def peaks_in(self, lo: float, hi: float) -> list[Peak]:
        return [pk for pk in self.peaks if lo < pk.location < hi]


def spectro_scan(
    H: Hamiltonian,
    site: Coord,
    strength: float,
    omegas: np.ndarray,
    decay: DecaySpec | None = None,
    method: str = "eig",
    peak_factor: float = 3.0,
    threads: int | None = None,
) -> SpectroScan:
    """``n_SP(Omega) = |a_site|^2`` over ``omegas``."""
    site = (int(site[0]), int(site[1]))
    if site not in H.index:
        raise DriveError(f"pump site {site} is not an active lattice site")
    omegas = _check_grid("omega", omegas)
    decay = decay or DecaySpec.for_pump(H, [site])
    R = Resolvent(H, decay, [site], method)
    vals = np.array(ordered_map(lambda w: abs(R.block(w)[0, 0] * strength) ** 2, omegas, threads))
    return SpectroScan(site, float(strength), omegas, vals, tuple(find_trace_peaks(omegas, vals, peak_factor)))


def check_consecutive(H: Hamiltonian, sites: Sequence[Coord]) -> None:
    """Raise unless ``sites`` are consecutive neighbours on one straight edge segment.

    An edge here is the outer perimeter or the ring of sites around the vacancy.
    """
    sites = [(int(s[0]), int(s[1])) for s in sites]
    if not sites:
        raise DriveError("empty axis: no pump sites")
    for s in sites:
        if s not in H.index:
            raise DriveError(f"pump site {s} is not an active lattice site")
    rings = [set(edge_loop(H.spec, "outer"))]
    if H.spec.vacancy is not None:
        rings.append(set(edge_loop(H.spec, "inner")))
    if not any(all(s in ring for s in sites) for ring in rings):
        raise DriveError(f"pump sites {sites} do not all lie on the same (outer or inner) edge")
    if len(sites) > 1:
        steps = {(b[0] - a[0], b[1] - a[1]) for a, b in zip(sites, sites[1:])}
        if len(steps) != 1 or next(iter(steps)) not in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            raise DriveError(f"pump sites {sites} are not consecutive along a straight edge")


@dataclass(frozen=True)
class MomentumScan:
    """Summed pump-site photon number versus pump phase gradient."""

    sites: tuple[Coord, ...]
    strength: float
    omega: float
    kps: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return len(self.sites)

    @property
    def k_peak(self) -> float:
        return float(self.kps[int(np.argmax(self.values))])

    @property
    def fwhm(self) -> float:
        from .peaks import half_max_width

        return half_max_width(self.kps, self.values, int(np.argmax(self.values)), periodic=True)


def default_kp_grid(n: int = 128) -> np.ndarray:
    return 2.0 * math.pi * np.arange(n) / n


def pump_phases(m: int, kps: np.ndarray) -> np.ndarray:
    """``(m, n_k)`` matrix of ``exp(i j k)`` for ``j = 1..m``."""
    return np.exp(1j * np.outer(np.arange(1, m + 1), kps))


def momentum_scan(
    H: Hamiltonian,
    sites: Sequence[Coord],
    strength: float,
    omega: float,
    kps: np.ndarray | None = None,
    decay: DecaySpec | None = None,
    method: str = "lu",
) -> MomentumScan:
    """``n_MP(k_P) = sum_j |a_{r_j}|^2`` under a phase-gradient pump on ``sites``."""
    check_consecutive(H, sites)
    sites = tuple((int(s[0]), int(s[1])) for s in sites)
    kps = default_kp_grid() if kps is None else _check_grid("k_P", kps)
    decay = decay or DecaySpec.for_pump(H, sites)
    G = Resolvent(H, decay, sites, method).block(omega)
    vals = np.sum(np.abs(G @ (strength * pump_phases(len(sites), kps))) ** 2, axis=0)
    return MomentumScan(sites, float(strength), float(omega), kps, vals)


def edge_phase_gradient(H: Hamiltonian, omega: float, sites: Sequence[Coord]) -> tuple[float, float]:
    """Phase gradient of the eigenmode nearest ``omega`` along ``sites``.

    Returns ``(energy, k0)`` with ``k0`` in ``[0, 2 pi)``: the ``k`` that
    maximizes ``|sum_j conj(v_j) exp(i j k)|`` over the pumped sites, the
    pump phase pattern that overlaps the mode best.
    """
    E, V = np.linalg.eigh(H.matrix)
    n = int(np.argmin(np.abs(E - omega)))
    v = V[H.index.ids(sites), n]
    ks = np.linspace(0.0, 2.0 * math.pi, 4097)[:-1]
    overlap = np.abs(v.conj() @ pump_phases(len(v), ks))
    return float(E[n]), float(ks[int(np.argmax(overlap))])


@dataclass(frozen=True)
class AlphaScan:
    """Summed pump-site photon number over vacancy flux, detuning and pump gradient.

    ``values[a, i, j]`` belongs to ``alphas[a]``, ``omegas[i]``, ``kps[j]``.
    """

    sites: tuple[Coord, ...]
    strength: float
    alphas: np.ndarray
    omegas: np.ndarray
    kps: np.ndarray
    values: np.ndarray

    def envelope(self) -> np.ndarray:
        """Largest response over ``k_P`` for every ``(alpha, omega)``."""
        return self.values.max(axis=2)


def alpha_scan(
    template: LatticeSpec,
    sites: Sequence[Coord],
    strength: float,
    alphas: np.ndarray,
    omegas: np.ndarray,
    kps: np.ndarray | None = None,
    disorder: DisorderSpec | None = None,
    regular_kappa: float = REGULAR_KAPPA,
    pump_kappa: float = PUMP_KAPPA,
    method: str = "eig",
    threads: int | None = None,
) -> AlphaScan:
    """Rebuild the lattice at each vacancy flux and map ``n_MP(Omega, k_P)``."""
    alphas = _check_grid("alpha", alphas)
    omegas = _check_grid("omega", omegas)
    kps = default_kp_grid(16) if kps is None else _check_grid("k_P", kps)
    sites = tuple((int(s[0]), int(s[1])) for s in sites)
    phases = strength * pump_phases(len(sites), kps)

    def frame(alpha: float) -> np.ndarray:
        H = lattice_hamiltonian(template.with_alpha(alpha), disorder)
        check_consecutive(H, sites)
        R = Resolvent(H, DecaySpec.for_pump(H, sites, regular_kappa, pump_kappa), sites, method)
        return np.array([np.sum(np.abs(R.block(w) @ phases) ** 2, axis=0) for w in omegas])

    values = np.array(ordered_map(frame, alphas, threads))
    return AlphaScan(sites, float(strength), alphas, omegas, kps, values)
