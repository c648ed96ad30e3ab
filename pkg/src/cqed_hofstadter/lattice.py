"""Annular square lattice with a synthetic gauge field.

Sites are labelled by 1-based coordinates ``(x, y)`` with ``x`` in ``[1, Nx]``
and ``y`` in ``[1, Ny]``. A rectangular vacancy of ``nx x ny`` sites is cut out
of the middle. Every elementary plaquette carries the flux ``phi`` and the
vacancy carries an extra flux ``alpha``.

Energies are in units of the hopping amplitude ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

Coord = tuple[int, int]

TWO_PI = 2.0 * math.pi


class LatticeError(ValueError):
    """Raised for an invalid lattice definition or mismatched lattice objects."""


def wrap_phase(theta: float) -> float:
    """Map a phase onto the interval (-pi, pi]."""
    w = math.fmod(theta + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


@dataclass(frozen=True)
class LatticeSpec:
    """Static definition of the lattice experiment.

    The flux per plaquette is ``2*pi*p/q`` unless ``phi`` is given, in which
    case ``phi`` (radians, any real) is used and ``p, q`` are ignored.
    """

    Nx: int = 24
    Ny: int = 24
    nx: int = 6
    ny: int = 6
    p: int = 1
    q: int = 4
    alpha: float = 0.0
    hopping: float = 1.0
    phi: float | None = None
    offset: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise LatticeError("; ".join(problems))

    @classmethod
    def diagnose(cls, **fields) -> list[str]:
        """Problems a spec with these fields would have, without raising."""
        unknown = sorted(set(fields) - set(cls.__dataclass_fields__))
        if unknown:
            return [f"unknown lattice field(s): {', '.join(unknown)}"]
        probe = object.__new__(cls)
        for name, f in cls.__dataclass_fields__.items():
            object.__setattr__(probe, name, fields.get(name, f.default))
        if probe.offset is not None:
            object.__setattr__(probe, "offset", tuple(probe.offset))
        return probe.problems()

    def problems(self) -> list[str]:
        """Every invariant violation, not just the first one."""
        out: list[str] = []
        if self.Nx < 1 or self.Ny < 1:
            out.append(f"outer dimensions must be positive, got Nx={self.Nx}, Ny={self.Ny}")
        if self.nx < 0 or self.ny < 0:
            out.append(f"vacancy dimensions must be non-negative, got nx={self.nx}, ny={self.ny}")
        if (self.nx == 0) != (self.ny == 0):
            out.append("vacancy needs both nx and ny positive, or both zero")
        if self.phi is None:
            if self.q < 1 or self.p < 0:
                out.append(f"flux fraction needs p >= 0 and q >= 1, got p={self.p}, q={self.q}")
            elif math.gcd(self.p, self.q) != 1:
                out.append(
                    f"gcd(p, q) must be 1 for rational flux, got gcd({self.p}, {self.q}) = "
                    f"{math.gcd(self.p, self.q)}"
                )
        elif not math.isfinite(self.phi):
            out.append(f"phi must be finite, got {self.phi}")
        if not (self.hopping > 0.0):
            out.append(f"hopping must be positive, got {self.hopping}")
        if not math.isfinite(self.alpha):
            out.append(f"alpha must be finite, got {self.alpha}")
        if self.nx > 0 and self.ny > 0 and self.Nx >= 1 and self.Ny >= 1:
            ox, oy = self.offset
            if self.offset == (0, 0) and ((self.Nx - self.nx) % 2 or (self.Ny - self.ny) % 2):
                out.append(
                    "Nx - nx and Ny - ny must be even so the vacancy is centered "
                    f"(got {self.Nx - self.nx}, {self.Ny - self.ny}); use offset for off-center holes"
                )
            xlo = (self.Nx - self.nx) // 2 + 1 + ox
            ylo = (self.Ny - self.ny) // 2 + 1 + oy
            xhi, yhi = xlo + self.nx - 1, ylo + self.ny - 1
            if xlo < 2 or ylo < 2 or xhi > self.Nx - 1 or yhi > self.Ny - 1:
                out.append(
                    f"vacancy x in [{xlo}, {xhi}], y in [{ylo}, {yhi}] must leave at least one "
                    f"ring of sites inside the {self.Nx}x{self.Ny} boundary"
                )
        return out

    @property
    def flux(self) -> float:
        """Plaquette flux in radians."""
        if self.phi is not None:
            return float(self.phi)
        return TWO_PI * self.p / self.q

    @property
    def rational(self) -> bool:
        return self.phi is None

    @property
    def vacancy(self) -> tuple[int, int, int, int] | None:
        """Inclusive vacancy bounds ``(xlo, xhi, ylo, yhi)``, or None."""
        if self.nx == 0:
            return None
        ox, oy = self.offset
        xlo = (self.Nx - self.nx) // 2 + 1 + ox
        ylo = (self.Ny - self.ny) // 2 + 1 + oy
        return xlo, xlo + self.nx - 1, ylo, ylo + self.ny - 1

    @property
    def n_sites(self) -> int:
        return self.Nx * self.Ny - self.nx * self.ny

    def in_vacancy(self, x: int, y: int) -> bool:
        v = self.vacancy
        return v is not None and v[0] <= x <= v[1] and v[2] <= y <= v[3]

    def is_active(self, x: int, y: int) -> bool:
        return 1 <= x <= self.Nx and 1 <= y <= self.Ny and not self.in_vacancy(x, y)

    def with_alpha(self, alpha: float) -> "LatticeSpec":
        return replace(self, alpha=float(alpha))

    def with_flux(self, p: int, q: int) -> "LatticeSpec":
        return replace(self, p=p, q=q, phi=None)

    @property
    def cut_row(self) -> int:
        """Row ``y_c`` whose upward vertical links right of the hole carry ``alpha``."""
        v = self.vacancy
        if v is None:
            return max(1, self.Ny // 2)
        return v[2] + (self.ny - 1) // 2

    @property
    def cut_column(self) -> int:
        """Links with ``x`` strictly greater than this column carry ``alpha``."""
        v = self.vacancy
        return v[1] if v is not None else self.Nx // 2


@dataclass(frozen=True)
class SiteIndex:
    """Bijection between active coordinates and contiguous ids.

    Ids follow row-major order on ``(y, x)``: all of row ``y=1`` first, then
    row ``y=2`` and so on.
    """

    coords: tuple[Coord, ...]
    _ids: dict[Coord, int] = field(repr=False, compare=False)

    @classmethod
    def build(cls, spec: LatticeSpec) -> "SiteIndex":
        coords = tuple(
            (x, y)
            for y in range(1, spec.Ny + 1)
            for x in range(1, spec.Nx + 1)
            if not spec.in_vacancy(x, y)
        )
        return cls(coords, {c: i for i, c in enumerate(coords)})

    def __len__(self) -> int:
        return len(self.coords)

    def __contains__(self, coord: object) -> bool:
        return coord in self._ids

    def __iter__(self) -> Iterator[Coord]:
        return iter(self.coords)

    def id(self, coord: Coord) -> int:
        try:
            return self._ids[(int(coord[0]), int(coord[1]))]
        except KeyError:
            raise LatticeError(f"site {tuple(coord)} is not an active lattice site") from None

    def ids(self, coords: Iterable[Coord]) -> np.ndarray:
        return np.array([self.id(c) for c in coords], dtype=np.intp)

    def coord(self, dense_id: int) -> Coord:
        return self.coords[dense_id]

    def xy(self) -> np.ndarray:
        """``(n_sites, 2)`` integer array of coordinates."""
        return np.array(self.coords, dtype=np.int64).reshape(-1, 2)


def forward_links(spec: LatticeSpec) -> Iterator[tuple[Coord, Coord]]:
    """Undirected nearest-neighbour links as ``(r, r')`` with ``r' = r + x`` or ``r + y``.

    Order is deterministic: row-major over ``r``, horizontal link before vertical.
    """
    for y in range(1, spec.Ny + 1):
        for x in range(1, spec.Nx + 1):
            if not spec.is_active(x, y):
                continue
            if spec.is_active(x + 1, y):
                yield (x, y), (x + 1, y)
            if spec.is_active(x, y + 1):
                yield (x, y), (x, y + 1)


@dataclass(frozen=True)
class GaugeField:
    """Peierls phases on directed nearest-neighbour links.

    ``link_phase[(r, r2)]`` is the phase picked up hopping from ``r`` to ``r2``;
    it lies in (-pi, pi] and the reverse link holds the negated value (mod 2 pi).
    """

    spec: LatticeSpec
    link_phase: dict[tuple[Coord, Coord], float]

    def phase(self, r: Coord, r2: Coord) -> float:
        try:
            return self.link_phase[(r, r2)]
        except KeyError:
            raise LatticeError(f"no link between {r} and {r2}") from None

    def forward(self) -> Iterator[tuple[Coord, Coord, float]]:
        for r, r2 in forward_links(self.spec):
            yield r, r2, self.link_phase[(r, r2)]

    def loop_phase(self, path: list[Coord]) -> float:
        """Phase accumulated around the closed path ``path[0] -> ... -> path[0]``, in [0, 2 pi)."""
        total = 0.0
        for a, b in zip(path, path[1:] + path[:1]):
            total += self.phase(a, b)
        return total % TWO_PI

    def regauged(self, chi: dict[Coord, float]) -> "GaugeField":
        """Gauge transform ``psi_r -> exp(i chi_r) psi_r`` applied to every link."""
        phases = {
            (r, r2): wrap_phase(th + chi[r2] - chi[r]) for (r, r2), th in self.link_phase.items()
        }
        return GaugeField(self.spec, phases)


def build_gauge(spec: LatticeSpec) -> GaugeField:
    """Landau-gauge link phases with the vacancy flux on a branch cut.

    Horizontal links carry no phase. The upward link ``(x, y) -> (x, y+1)``
    carries ``x * phi``; if ``y`` is the cut row and ``x`` lies strictly right
    of the vacancy it carries an extra ``alpha``. Counter-clockwise plaquette
    sums are then ``phi`` everywhere and a counter-clockwise loop around the
    vacancy picks up ``alpha`` on top of the enclosed plaquette flux.
    """
    phi = spec.flux
    yc, xc = spec.cut_row, spec.cut_column
    phases: dict[tuple[Coord, Coord], float] = {}
    for r, r2 in forward_links(spec):
        x, y = r
        if r2[1] == y:
            theta = 0.0
        else:
            theta = x * phi
            if y == yc and x > xc:
                theta += spec.alpha
        w = wrap_phase(theta)
        phases[(r, r2)] = w
        phases[(r2, r)] = wrap_phase(-theta)
    return GaugeField(spec, phases)


@dataclass(frozen=True)
class DisorderSpec:
    """Quasi-static disorder: normal on-site shifts, normal hopping shifts, fixed defects.

    On-site shifts are drawn first, one per site in dense-id order, then one
    hopping shift per undirected link in :func:`forward_links` order, both
    from ``numpy.random.default_rng(seed)``. Defects replace the on-site shift.
    """

    sigma_diag: float = 0.0
    sigma_offdiag: float = 0.0
    seed: int = 0
    defects: tuple[tuple[Coord, float], ...] = ()

    def __post_init__(self) -> None:
        if self.sigma_diag < 0 or self.sigma_offdiag < 0:
            raise LatticeError("disorder standard deviations must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise LatticeError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        object.__setattr__(
            self,
            "defects",
            tuple(((int(c[0]), int(c[1])), float(d)) for c, d in self.defects),
        )

    @property
    def is_clean(self) -> bool:
        return self.sigma_diag == 0 and self.sigma_offdiag == 0 and not self.defects

    def draw(self, n_sites: int, n_links: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        diag = rng.normal(0.0, self.sigma_diag, n_sites)
        links = rng.normal(0.0, self.sigma_offdiag, n_links)
        return diag, links


def hindrance(
    sites: Iterable[Coord] = ((12, 23), (12, 24), (13, 23), (13, 24)),
    detuning: float = 30.0,
    sigma: float = 0.05,
    seed: int = 0,
) -> DisorderSpec:
    """Disorder with a block of strongly detuned sites on the upper outer edge."""
    return DisorderSpec(sigma, sigma, seed, tuple((s, detuning) for s in sites))


@dataclass(frozen=True)
class Hamiltonian:
    """Hermitian coupling matrix ``B`` over active sites, ``a^dag B a = H``."""

    matrix: np.ndarray
    index: SiteIndex
    spec: LatticeSpec
    disorder: DisorderSpec | None = None

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]


def build_hamiltonian(
    spec: LatticeSpec,
    gauge: GaugeField | None = None,
    disorder: DisorderSpec | None = None,
) -> Hamiltonian:
    """Coupling matrix with ``B[r', r] = T exp(-i theta_{r' r})`` on every active link.

    Both triangles are written from one phase so the result is exactly Hermitian.
    """
    if gauge is None:
        gauge = build_gauge(spec)
    elif gauge.spec != spec:
        g = gauge.spec
        raise LatticeError(
            f"gauge built for {g.Nx}x{g.Ny} lattice with {g.nx}x{g.ny} vacancy "
            f"(flux {g.flux:.6g}, alpha {g.alpha:.6g}) does not match spec "
            f"{spec.Nx}x{spec.Ny} with {spec.nx}x{spec.ny} vacancy "
            f"(flux {spec.flux:.6g}, alpha {spec.alpha:.6g})"
        )
    index = SiteIndex.build(spec)
    n = len(index)
    links = list(gauge.forward())
    B = np.zeros((n, n), dtype=np.complex128)

    if disorder is not None:
        dw, dT = disorder.draw(n, len(links))
        for coord, delta in disorder.defects:
            dw[index.id(coord)] = delta
    else:
        dw = np.zeros(n)
        dT = np.zeros(len(links))

    T = spec.hopping
    for (r, r2, theta), dt in zip(links, dT):
        i, j = index.id(r), index.id(r2)
        amp = (T + dt) * np.exp(-1j * theta)
        B[j, i] = amp
        B[i, j] = np.conj(amp)
    B[np.diag_indices(n)] = dw
    B.setflags(write=False)
    return Hamiltonian(B, index, spec, disorder)


def lattice_hamiltonian(spec: LatticeSpec, disorder: DisorderSpec | None = None) -> Hamiltonian:
    return build_hamiltonian(spec, build_gauge(spec), disorder)


def edge_sets(spec: LatticeSpec) -> tuple[frozenset[Coord], frozenset[Coord], frozenset[Coord]]:
    """Partition of active sites into outer perimeter, vacancy neighbours, and bulk.

    A site on the perimeter that also touches the vacancy counts as outer.
    """
    outer, inner, bulk = set(), set(), set()
    for y in range(1, spec.Ny + 1):
        for x in range(1, spec.Nx + 1):
            if not spec.is_active(x, y):
                continue
            if x in (1, spec.Nx) or y in (1, spec.Ny):
                outer.add((x, y))
            elif any(spec.in_vacancy(x + dx, y + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))):
                inner.add((x, y))
            else:
                bulk.add((x, y))
    return frozenset(outer), frozenset(inner), frozenset(bulk)


def boundary_distance(spec: LatticeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-site ring numbers, in dense-id order.

    Returns ``(outer_ring, inner_ring)``: ``outer_ring`` is 1 on the perimeter,
    2 on the next ring inwards, and so on; ``inner_ring`` is the Chebyshev
    distance to the vacancy (1 for the ring hugging it) or a large number when
    there is no vacancy.
    """
    xy = SiteIndex.build(spec).xy()
    x, y = xy[:, 0], xy[:, 1]
    outer = np.minimum.reduce([x, spec.Nx + 1 - x, y, spec.Ny + 1 - y])
    v = spec.vacancy
    if v is None:
        inner = np.full(len(x), np.iinfo(np.int64).max // 2)
    else:
        dx = np.maximum.reduce([v[0] - x, x - v[1], np.zeros_like(x)])
        dy = np.maximum.reduce([v[2] - y, y - v[3], np.zeros_like(y)])
        inner = np.maximum(dx, dy)
    return outer, inner


def edge_regions(spec: LatticeSpec, depth: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks for the outer and inner edge bands of ``depth`` rings.

    A site close to both boundaries belongs to the outer band only.
    """
    outer_ring, inner_ring = boundary_distance(spec)
    outer = outer_ring <= depth
    inner = (inner_ring <= depth) & ~outer
    return outer, inner


def edge_loop(spec: LatticeSpec, which: str = "outer") -> list[Coord]:
    """Sites of a boundary ring in counter-clockwise order.

    ``outer`` is the perimeter starting at ``(1, 1)``; ``inner`` is the ring of
    sites hugging the vacancy (corners included) starting at its lower-left corner.
    """
    if which == "outer":
        xlo, xhi, ylo, yhi = 1, spec.Nx, 1, spec.Ny
    elif which == "inner":
        v = spec.vacancy
        if v is None:
            raise LatticeError("lattice has no vacancy, so no inner edge")
        xlo, xhi, ylo, yhi = v[0] - 1, v[1] + 1, v[2] - 1, v[3] + 1
    else:
        raise LatticeError(f"edge must be 'outer' or 'inner', got {which!r}")
    if xlo == xhi or ylo == yhi:
        return [(x, y) for y in range(ylo, yhi + 1) for x in range(xlo, xhi + 1)]
    path = [(x, ylo) for x in range(xlo, xhi + 1)]
    path += [(xhi, y) for y in range(ylo + 1, yhi + 1)]
    path += [(x, yhi) for x in range(xhi - 1, xlo - 1, -1)]
    path += [(xlo, y) for y in range(yhi - 1, ylo, -1)]
    return path


def top_edge_sites(m: int, y: int = 24) -> list[Coord]:
    """Consecutive top-edge sites from ``floor(7 - m/2)`` to ``floor(6 + m/2)``."""
    start, stop = math.floor(7 - m / 2), math.floor(6 + m / 2)
    return [(x, y) for x in range(start, stop + 1)]
