"""Eigenmodes, edge/bulk classification, Hofstadter butterflies and band gaps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._parallel import ordered_map
from .lattice import Hamiltonian, LatticeSpec, edge_regions, lattice_hamiltonian

OESM, IESM, BSM = "OESM", "IESM", "BSM"


class ClassificationError(RuntimeError):
    """Too few bulk modes to estimate band edges."""


@dataclass(frozen=True)
class Classifier:
    """Edge/bulk classification knobs.

    A mode is an outer edge mode when more than ``threshold`` of its weight
    sits within ``outer_depth`` rings of the outer perimeter, an inner edge
    mode when more than ``threshold`` sits within ``inner_depth`` rings of the
    vacancy, and a bulk mode otherwise.
    """

    threshold: float = 0.5
    outer_depth: int = 2
    inner_depth: int = 2


@dataclass(frozen=True)
class ModeSet:
    """Eigen-decomposition of a Hamiltonian with per-mode region weights.

    ``weights[i]`` is the ``(outer, inner, bulk)`` probability of mode ``i``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray
    tags: tuple[str, ...]
    hamiltonian: Hamiltonian

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def mask(self, tag: str) -> np.ndarray:
        return np.array([t == tag for t in self.tags])

    def energies(self, tag: str) -> np.ndarray:
        return self.eigenvalues[self.mask(tag)]

    def residual(self) -> float:
        """``max_i ||B v_i - E_i v_i||``."""
        B = self.hamiltonian.matrix
        R = B @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.linalg.norm(R, axis=0).max()) if len(self) else 0.0

    def orthonormality_error(self) -> float:
        V = self.eigenvectors
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max()) if len(self) else 0.0


def region_weights(H: Hamiltonian, vectors: np.ndarray, classifier: Classifier = Classifier()) -> np.ndarray:
    """``(n_modes, 3)`` outer/inner/bulk weights of normalized column vectors."""
    outer_band, _ = edge_regions(H.spec, classifier.outer_depth)
    _, inner_band = edge_regions(H.spec, classifier.inner_depth)
    inner_band = inner_band & ~outer_band
    prob = np.abs(vectors) ** 2
    total = prob.sum(axis=0)
    w_out = prob[outer_band].sum(axis=0) / total
    w_in = prob[inner_band].sum(axis=0) / total
    return np.column_stack([w_out, w_in, 1.0 - w_out - w_in])


def classify(weights: np.ndarray, threshold: float = 0.5) -> tuple[str, ...]:
    tags = []
    for w_out, w_in, _ in weights:
        if w_out > threshold:
            tags.append(OESM)
        elif w_in > threshold:
            tags.append(IESM)
        else:
            tags.append(BSM)
    return tuple(tags)


def diagonalize(H: Hamiltonian, classifier: Classifier = Classifier()) -> ModeSet:
    """Full spectrum, orthonormal eigenbasis and edge/bulk tags."""
    try:
        E, V = scipy.linalg.eigh(H.matrix, driver="evd", check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        cond = np.linalg.cond(H.matrix)
        raise np.linalg.LinAlgError(
            f"eigensolver failed on {H.n_sites}x{H.n_sites} matrix "
            f"(condition number {cond:.3g}, max |B| {np.abs(H.matrix).max():.3g}): {exc}"
        ) from exc
    W = region_weights(H, V, classifier)
    return ModeSet(E, V, W, classify(W, classifier.threshold), H)


def coprime_fluxes(q_max: int) -> list[tuple[int, int]]:
    """All reduced ``p/q`` in ``[0, 1)`` with ``q <= q_max``, sorted by value."""
    if q_max < 1:
        raise ValueError(f"q_max must be at least 1, got {q_max}")
    pairs = {(0, 1)}
    for q in range(2, q_max + 1):
        pairs.update((p, q) for p in range(1, q) if math.gcd(p, q) == 1)
    return sorted(pairs, key=lambda pq: pq[0] / pq[1])


def butterfly(
    template: LatticeSpec,
    q_max: int,
    phi_grid: np.ndarray | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Spectrum versus flux as rows ``(phi, index, energy)``.

    Covers every reduced ``p/q`` with ``q <= q_max`` plus any extra ``phi``
    values in ``phi_grid``. Rows are sorted by ``phi`` then energy.
    """
    if q_max < 2:
        raise ValueError(f"q_max must be at least 2, got {q_max}")
    phis = {2.0 * math.pi * p / q: (p, q) for p, q in coprime_fluxes(q_max)}
    if phi_grid is not None:
        for phi in np.asarray(phi_grid, dtype=float).ravel():
            phis.setdefault(float(phi), None)

    def column(item: tuple[float, tuple[int, int] | None]) -> np.ndarray:
        phi, pq = item
        spec = template.with_flux(*pq) if pq is not None else _irrational(template, phi)
        return np.linalg.eigvalsh(lattice_hamiltonian(spec).matrix)

    items = sorted(phis.items())
    columns = ordered_map(column, items, threads)
    rows = [
        np.column_stack([np.full(len(E), phi), np.arange(len(E)), E])
        for (phi, _), E in zip(items, columns)
    ]
    return np.vstack(rows)


def _irrational(template: LatticeSpec, phi: float) -> LatticeSpec:
    from dataclasses import replace

    return replace(template, phi=float(phi))


@dataclass(frozen=True)
class Gap:
    h: int
    lower: float
    upper: float
    closed: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def interior(self, fraction: float = 1.0) -> tuple[float, float]:
        """Central ``fraction`` of the gap."""
        half = 0.5 * fraction * self.width
        return self.center - half, self.center + half


@dataclass(frozen=True)
class GapTable:
    p: int
    q: int
    gaps: tuple[Gap, ...]

    def __len__(self) -> int:
        return len(self.gaps)

    def __getitem__(self, h: int) -> Gap:
        """Gap by its 1-based index."""
        for g in self.gaps:
            if g.h == h:
                return g
        raise KeyError(f"no gap {h} for flux {self.p}/{self.q}")

    @property
    def open(self) -> tuple[Gap, ...]:
        return tuple(g for g in self.gaps if not g.closed)


def find_gaps(
    modes: ModeSet,
    p: int,
    q: int,
    closed_width: float = 0.05,
    window: float = 0.5,
    dominance: float = 1.5,
) -> GapTable:
    """Bulk band gaps estimated from bulk-classified modes.

    Band ``h`` holds about a fraction ``1/q`` of the bulk modes, so gap ``h``
    is searched among the sorted bulk energies within ``window / (2q)`` of the
    expected filling ``h / q``. The widest spacing there counts as a gap only
    if it exceeds ``dominance`` times the runner-up; otherwise the bands touch
    (near a Dirac point the bulk levels are sparse but gapless) and the
    spacing straddling the expected filling is reported.
    Either way a gap narrower than ``closed_width`` is flagged closed.
    """
    if p == 0 or q == 1:
        return GapTable(p, q, ())
    if math.gcd(p, q) != 1:
        raise ValueError(f"gcd(p, q) must be 1, got gcd({p}, {q}) = {math.gcd(p, q)}")
    bulk = np.sort(modes.energies(BSM))
    n = len(bulk)
    if n < 0.5 * len(modes):
        raise ClassificationError(
            f"only {n} of {len(modes)} modes classify as bulk; check classifier thresholds or disorder"
        )
    spacing = np.diff(bulk)
    gaps = []
    half = max(1, int(round(window * n / (2 * q))))
    for h in range(1, q):
        mid = min(n - 2, max(0, int(round(h * n / q)) - 1))
        lo, hi = max(0, mid - half), min(n - 1, mid + half + 1)
        local = spacing[lo:hi]
        j = lo + int(np.argmax(local))
        runner_up = np.partition(local, -2)[-2] if len(local) > 1 else 0.0
        if spacing[j] <= dominance * runner_up:
            j = mid
        lower, upper = float(bulk[j]), float(bulk[j + 1])
        gaps.append(Gap(h, lower, upper, upper - lower < closed_width))
    return GapTable(p, q, tuple(gaps))


def in_gap_modes(modes: ModeSet, gap: Gap) -> np.ndarray:
    """Indices of modes strictly inside ``gap``."""
    E = modes.eigenvalues
    return np.flatnonzero((E > gap.lower) & (E < gap.upper))
