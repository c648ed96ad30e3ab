"""Winding and Chern numbers of Hofstadter bands.

Three independent routes are provided:

* the Diophantine relation ``h = s*q + t*p`` for the gap winding numbers,
* a lattice field-strength Chern computation on the ``q``-site magnetic
  Bloch Hamiltonian,
* spectral flow of edge-mode resonances while the vacancy flux is pumped.

Orientation convention: the hopping ``B[r', r] = T exp(-i theta_{r' r})``
makes a counter-clockwise loop pick up ``exp(-i * flux)`` in the amplitude,
so both the Berry flux sum and the upward spectral flow of outer-edge
resonances come out with the opposite sign to ``t``. Both are negated here so
that every route reports the same integers as the Diophantine relation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize

from ._parallel import ordered_map
from .peaks import find_map_peaks


class TopologyError(ValueError):
    """Invalid input or an ill-defined invariant."""


class BandTouchingError(TopologyError):
    """A requested band touches a neighbour somewhere in the Brillouin zone."""


class AmbiguousFlowError(TopologyError):
    """Peak tracking between scan frames did not give a near-integer flow."""


@dataclass(frozen=True)
class WindingRecord:
    """Solution of ``h = s*q + t*p`` with ``|t| <= q/2``.

    When ``|t| = q/2`` both signs solve the relation; ``t`` then holds the
    positive one and ``degenerate`` is set.
    """

    p: int
    q: int
    h: int
    s: int
    t: int
    degenerate: bool = False


@dataclass(frozen=True)
class ChernRecord:
    """Chern number of a band, or of a group of touching bands.

    ``h`` numbers the (possibly composite) bands from 1 upwards; ``bands``
    lists the 1-based Hofstadter bands it contains.
    """

    p: int
    q: int
    h: int
    bands: tuple[int, ...]
    C: int
    method: str

    def to_json(self) -> dict:
        d = asdict(self)
        d["bands"] = list(self.bands)
        return d


def _check_pq(p: int, q: int) -> None:
    if q < 1 or p < 0:
        raise TopologyError(f"need p >= 0 and q >= 1, got p={p}, q={q}")
    if math.gcd(p, q) != 1:
        raise TopologyError(f"gcd(p, q) must be 1, got gcd({p}, {q}) = {math.gcd(p, q)}")


def diophantine_winding(p: int, q: int, h: int) -> WindingRecord:
    """Winding number of gap ``h`` from ``h = s*q + t*p``."""
    _check_pq(p, q)
    if not 1 <= h <= q - 1:
        raise TopologyError(f"gap index must lie in [1, {q - 1}] for q={q}, got {h}")
    sols = [t for t in range(-(q // 2), q // 2 + 1) if (h - t * p) % q == 0]
    t = max(sols)
    return WindingRecord(p, q, h, (h - t * p) // q, t, degenerate=len(sols) > 1)


def diophantine_windings(p: int, q: int) -> list[WindingRecord]:
    return [diophantine_winding(p, q, h) for h in range(1, q)]


def _group_bands(q: int, separated: Sequence[bool]) -> list[tuple[int, ...]]:
    """Split bands ``1..q`` at the gaps flagged in ``separated`` (index ``h-1``)."""
    groups, cur = [], [1]
    for h in range(1, q):
        if separated[h - 1]:
            groups.append(tuple(cur))
            cur = []
        cur.append(h + 1)
    groups.append(tuple(cur))
    return groups


def chern_from_windings(
    windings: Iterable[WindingRecord],
    merge_degenerate: bool = False,
) -> list[ChernRecord]:
    """``C_h = t_h - t_{h-1}`` with ``t_0 = t_q = 0``.

    A degenerate winding raises unless ``merge_degenerate`` is set, in which
    case the two bands on either side of that gap are reported as one
    composite band.
    """
    ws = sorted(windings, key=lambda w: w.h)
    if not ws:
        raise TopologyError("no winding records given")
    p, q = ws[0].p, ws[0].q
    if [w.h for w in ws] != list(range(1, q)) or any((w.p, w.q) != (p, q) for w in ws):
        raise TopologyError(f"need one winding per gap 1..{q - 1} for a single flux {p}/{q}")
    bad = [w.h for w in ws if w.degenerate]
    if bad and not merge_degenerate:
        raise TopologyError(f"gap(s) {bad} of flux {p}/{q} have degenerate winding |t| = q/2")
    groups = _group_bands(q, [not w.degenerate for w in ws])
    t = {0: 0, q: 0, **{w.h: w.t for w in ws}}
    return [
        ChernRecord(p, q, i + 1, g, t[g[-1]] - t[g[0] - 1], "diophantine")
        for i, g in enumerate(groups)
    ]


def chern_numbers_diophantine(p: int, q: int) -> list[ChernRecord]:
    """Diophantine Chern numbers, touching bands merged where ``|t| = q/2``."""
    if p == 0 or q == 1:
        return [ChernRecord(p, 1, 1, (1,), 0, "diophantine")]
    return chern_from_windings(diophantine_windings(p, q), merge_degenerate=True)


def harper_bloch(p: int, q: int, kx: float, ky: float, hopping: float = 1.0) -> np.ndarray:
    """Bloch Hamiltonian of the ``q``-site magnetic unit cell.

    Built with the same Landau gauge and hopping sign as the lattice module:
    cell site ``j`` sits at column ``x = j + 1`` and its upward hop carries
    ``exp(-i x phi)``.
    """
    phi = 2.0 * math.pi * p / q
    x = np.arange(1, q + 1)
    H = np.diag(2.0 * hopping * np.cos(ky - x * phi)).astype(np.complex128)
    if q == 1:
        H[0, 0] += 2.0 * hopping * math.cos(kx)
        return H
    for j in range(q - 1):
        H[j + 1, j] += hopping
        H[j, j + 1] += hopping
    wrap = hopping * np.exp(1j * kx)
    H[0, q - 1] += wrap
    H[q - 1, 0] += np.conj(wrap)
    return H


def _min_gaps(p: int, q: int, grid: int, E: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Smallest gap between bands ``b`` and ``b+1`` after local refinement."""
    out = np.empty(q - 1)
    for b in range(q - 1):
        g = E[..., b + 1] - E[..., b]
        best = float(g.min())
        for flat in np.argsort(g, axis=None)[:3]:
            a, c = np.unravel_index(flat, g.shape)

            def gap(k: np.ndarray, b: int = b) -> float:
                e = np.linalg.eigvalsh(harper_bloch(p, q, k[0], k[1]))
                return float(e[b + 1] - e[b])

            res = minimize(
                gap,
                np.array([kx[a], ky[c]]),
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000,
                         "initial_simplex": np.array([[kx[a], ky[c]],
                                                      [kx[a] + 2 * np.pi / grid, ky[c]],
                                                      [kx[a], ky[c] + 2 * np.pi / grid]])},
            )
            best = min(best, float(res.fun))
        out[b] = best
    return out


def chern_fhs(
    p: int,
    q: int,
    grid: int = 20,
    bands: Sequence[int] | None = None,
    merge_touching: bool = False,
    touch_tol: float = 1e-6,
    threads: int | None = None,
) -> list[ChernRecord]:
    """Chern numbers from Berry flux through a ``grid x grid`` Brillouin-zone mesh.

    Each mesh plaquette contributes the principal argument of the product of
    the four link overlaps; for a group of touching bands the overlaps are
    determinants over the group. The sum over the mesh is an exact integer
    multiple of ``2 pi``.

    Args:
        bands: 1-based bands to return; defaults to all.
        merge_touching: treat bands that touch as one composite band instead
            of raising :class:`BandTouchingError`.
        touch_tol: refined band gap below which two bands count as touching.
    """
    if p == 0 or q == 1:
        return [ChernRecord(p, 1, 1, (1,), 0, "fhs")]
    _check_pq(p, q)
    if grid < 6:
        raise TopologyError(f"grid must be at least 6, got {grid}")
    k = 2.0 * math.pi * np.arange(grid) / grid
    rows = ordered_map(
        lambda kx: [np.linalg.eigh(harper_bloch(p, q, kx, ky)) for ky in k], list(k), threads
    )
    E = np.array([[e for e, _ in row] for row in rows])
    U = np.array([[v for _, v in row] for row in rows])

    gaps = _min_gaps(p, q, grid, E, k, k)
    touching = gaps < touch_tol
    groups = _group_bands(q, list(~touching))
    wanted = set(range(1, q + 1) if bands is None else bands)
    records = []
    for i, g in enumerate(groups):
        if not wanted & set(g):
            continue
        if len(g) > 1 and not merge_touching:
            raise BandTouchingError(
                f"bands {list(g)} of flux {p}/{q} touch (min gap {gaps[g[0] - 1:g[-1] - 1].min():.3g} < {touch_tol:g})"
            )
        records.append(ChernRecord(p, q, i + 1, g, _berry_flux_chern(U[..., g[0] - 1:g[-1]]), "fhs"))
    return records


def _berry_flux_chern(u: np.ndarray) -> int:
    """Chern number of the band group in ``u`` with shape ``(nk, nk, q, nb)``."""

    def link(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.linalg.det(np.einsum("xyia,xyib->xyab", a.conj(), b))

    ux = np.roll(u, -1, axis=0)
    uy = np.roll(u, -1, axis=1)
    uxy = np.roll(ux, -1, axis=1)
    F = np.angle(link(u, ux) * link(ux, uxy) * link(uxy, uy) * link(uy, u))
    total = -F.sum() / (2.0 * math.pi)
    C = int(round(total))
    if abs(total - C) > 1e-6:
        raise TopologyError(f"Berry flux sum {total:.6f} is not an integer; refine the grid")
    return C


@dataclass(frozen=True)
class WindingEstimate:
    """Winding number of one gap measured from an alpha scan."""

    t: int
    flow: float
    window: tuple[float, float]
    peaks_per_frame: tuple[int, ...]


def track_flow(
    frames: Sequence[np.ndarray],
    window: tuple[float, float],
    k_weight: float = 0.05,
    gate: float = 0.045,
) -> float:
    """Net upward motion of peaks through ``window``, in units of the window height.

    Consecutive frames of ``(omega, k)`` peaks are matched by minimum-cost
    assignment on ``|d omega| + k_weight * |d k|``. Pairs costing more than
    ``gate`` are left unmatched, so the gate should stay below half the
    spacing between neighbouring resonances. Costs are sums of grid steps and
    often land exactly on the gate, hence the round-off slack in the
    comparison. Each matched pair contributes its displacement clipped to the
    window. Summed over all frames this equals the number of
    upward crossings of a reference level averaged uniformly over the window.
    """
    lo, hi = window
    if not hi > lo:
        raise TopologyError(f"empty frequency window [{lo}, {hi}]")
    total = 0.0
    for a, b in zip(frames[:-1], frames[1:]):
        if len(a) == 0 or len(b) == 0:
            continue
        d_om = np.abs(a[:, None, 0] - b[None, :, 0])
        d_k = np.abs(np.angle(np.exp(1j * (a[:, None, 1] - b[None, :, 1]))))
        cost = d_om + k_weight * d_k
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if cost[i, j] <= gate * (1.0 + 1e-9):
                total += np.clip(b[j, 0], lo, hi) - np.clip(a[i, 0], lo, hi)
    return total / (hi - lo)


def extract_winding(
    scan,
    window: tuple[float, float],
    tolerance: float = 0.35,
    prominence: float = 0.1,
    row_fraction: float = 0.25,
) -> WindingEstimate:
    """Signed winding number of one gap from an alpha scan of edge resonances.

    Args:
        scan: an ``AlphaScan`` whose ``alphas`` run from 0 to ``2 pi`` and
            whose ``values`` have shape ``(n_alpha, n_omega, n_k)``.
        window: ``(lo, hi)`` frequency band inside the gap over which crossings
            are averaged.
        tolerance: largest distance of the measured flow from an integer.

    The result is the negated upward flow, following the module orientation
    convention, so outer-edge resonances give ``t`` and inner-edge ones ``-t``.
    """
    alphas = np.asarray(scan.alphas)
    if len(alphas) < 2 or not math.isclose(alphas[-1] - alphas[0], 2.0 * math.pi, rel_tol=1e-12):
        raise TopologyError("alpha grid must span exactly one flux quantum, 0 to 2 pi")
    frames = [
        find_map_peaks(scan.omegas, scan.kps, v, prominence=prominence, row_fraction=row_fraction)
        for v in scan.values
    ]
    flow = track_flow(frames, window)
    t = int(round(-flow))
    if abs(-flow - t) > tolerance:
        raise AmbiguousFlowError(
            f"measured flow {-flow:.3f} is not within {tolerance} of an integer; "
            "use a finer alpha or k grid"
        )
    return WindingEstimate(t, float(-flow), (float(window[0]), float(window[1])), tuple(len(f) for f in frames))


def records_json(records: Iterable[ChernRecord], windings: Iterable[WindingRecord] = ()) -> list[dict]:
    """Flat ``{p, q, h, s, t, C, method}`` records, one per gap or band."""
    out = []
    for w in windings:
        out.append({"p": w.p, "q": w.q, "h": w.h, "s": w.s, "t": w.t, "C": None,
                    "method": "diophantine", "degenerate": w.degenerate})
    for r in records:
        out.append({"p": r.p, "q": r.q, "h": r.h, "s": None, "t": None, "C": r.C,
                    "method": r.method, "bands": list(r.bands)})
    return out
