import math

import numpy as np
import pytest

from cqed_hofstadter.lattice import DisorderSpec, LatticeSpec, lattice_hamiltonian
from cqed_hofstadter.spectrum import (
    BSM,
    IESM,
    OESM,
    ClassificationError,
    Classifier,
    butterfly,
    coprime_fluxes,
    diagonalize,
    find_gaps,
    in_gap_modes,
)


def hand_built_square(N, phi):
    """Open N x N square lattice, vertical hop from (x, y) to (x, y+1) times exp(-i x phi)."""
    H = np.zeros((N * N, N * N), complex)
    site = lambda x, y: (y - 1) * N + (x - 1)
    for y in range(1, N + 1):
        for x in range(1, N + 1):
            if x < N:
                H[site(x + 1, y), site(x, y)] = 1.0
                H[site(x, y), site(x + 1, y)] = 1.0
            if y < N:
                H[site(x, y + 1), site(x, y)] = np.exp(-1j * x * phi)
                H[site(x, y), site(x, y + 1)] = np.exp(1j * x * phi)
    return H


def test_quarter_spectrum_size_and_symmetry(quarter_modes):
    E = quarter_modes.eigenvalues
    assert len(E) == 540
    assert np.all(np.diff(E) >= 0)
    assert np.max(np.abs(E + E[::-1])) <= 1e-10


def test_modeset_invariants(quarter_modes):
    assert quarter_modes.orthonormality_error() <= 1e-10
    assert quarter_modes.residual() <= 1e-9
    np.testing.assert_allclose(quarter_modes.weights.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(quarter_modes.weights >= -1e-12)


def test_unmagnetized_bandwidth():
    E = diagonalize(lattice_hamiltonian(LatticeSpec(nx=0, ny=0, p=0, q=1))).eigenvalues
    assert E.min() >= -4 and E.max() <= 4


def test_small_instance_against_hand_built_matrix():
    spec = LatticeSpec(Nx=4, Ny=4, nx=0, ny=0, p=1, q=2)
    E = diagonalize(lattice_hamiltonian(spec)).eigenvalues
    np.testing.assert_allclose(E, np.linalg.eigvalsh(hand_built_square(4, math.pi)), atol=1e-12)


def test_classification_thresholds():
    modes = diagonalize(lattice_hamiltonian(LatticeSpec()), Classifier(threshold=0.5))
    for tag, (w_out, w_in, _) in zip(modes.tags, modes.weights):
        if tag == OESM:
            assert w_out > 0.5
        elif tag == IESM:
            assert w_in > 0.5 and w_out <= 0.5
        else:
            assert w_out <= 0.5 and w_in <= 0.5


def test_coprime_fluxes():
    assert coprime_fluxes(4) == [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4)]


@pytest.fixture(scope="module")
def small_butterfly():
    spec = LatticeSpec(Nx=12, Ny=12, nx=2, ny=2)
    grid = 2 * math.pi * np.arange(8) / 8
    return spec, butterfly(spec, 5, grid, threads=2)


def test_butterfly_rows_sorted(small_butterfly):
    _, table = small_butterfly
    phis = table[:, 0]
    assert np.all(np.diff(phis) >= 0)
    for phi in np.unique(phis):
        E = table[phis == phi, 2]
        assert np.all(np.diff(E) >= 0)


def test_butterfly_zero_flux_column(small_butterfly):
    spec, table = small_butterfly
    E0 = table[table[:, 0] == 0.0, 2]
    ref = np.linalg.eigvalsh(lattice_hamiltonian(spec.with_flux(0, 1)).matrix)
    np.testing.assert_array_equal(E0, ref)


def test_butterfly_conjugate_fluxes_match(small_butterfly):
    _, table = small_butterfly
    cols = {phi: table[table[:, 0] == phi, 2] for phi in np.unique(table[:, 0])}
    for p, q in coprime_fluxes(5):
        if p == 0:
            continue
        a = cols[2 * math.pi * p / q]
        b = cols[2 * math.pi * (q - p) / q]
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_butterfly_thread_count_does_not_change_bytes():
    spec = LatticeSpec(Nx=8, Ny=8, nx=2, ny=2)
    assert butterfly(spec, 4, threads=1).tobytes() == butterfly(spec, 4, threads=3).tobytes()


def test_butterfly_quarter_flux_clusters(quarter_spec):
    # four dense clusters: the outer bands are narrow, the middle two touch at zero
    table = butterfly(quarter_spec, 4)
    E = table[np.isclose(table[:, 0], math.pi / 2), 2]
    in_band = lambda lo, hi: np.sum((E >= lo) & (E <= hi)) / (hi - lo)
    dense_outer = in_band(-2.83, -2.61)
    gap = in_band(-2.4, -1.2)
    assert dense_outer > 10 * gap
    assert in_band(-0.1, 0.1) > 0  # no gap at the Dirac point


def test_gaps_quarter_flux(quarter_gaps):
    assert len(quarter_gaps) == 3
    assert [g.closed for g in quarter_gaps.gaps] == [False, True, False]
    g1, g3 = quarter_gaps[1], quarter_gaps[3]
    # bulk Harper bands at 1/4 flux: [-2.83, -2.61], [-1.08, 0], [0, 1.08], [2.61, 2.83]
    assert -2.7 < g1.lower < -2.55 and -1.1 < g1.upper < -0.9
    assert g3.lower == pytest.approx(-g1.upper, abs=1e-9)


def test_gaps_fifth_flux():
    modes = diagonalize(lattice_hamiltonian(LatticeSpec(p=1, q=5)))
    gaps = find_gaps(modes, 1, 5)
    assert len(gaps) == 4 and not any(g.closed for g in gaps.gaps)


def test_no_gaps_without_flux():
    modes = diagonalize(lattice_hamiltonian(LatticeSpec(p=0, q=1)))
    assert len(find_gaps(modes, 0, 1)) == 0


def test_too_few_bulk_modes_rejected(quarter_H):
    modes = diagonalize(quarter_H, Classifier(threshold=0.0))
    with pytest.raises(ClassificationError):
        find_gaps(modes, 1, 4)


def test_in_gap_modes_are_edge_modes(quarter_modes, quarter_gaps):
    for g in quarter_gaps.open:
        tags = [quarter_modes.tags[i] for i in in_gap_modes(quarter_modes, g)]
        assert len(tags) >= 2
        assert BSM not in tags
        assert OESM in tags and IESM in tags


@pytest.mark.xfail(strict=True, reason="43 modes sit in each open quarter-flux gap; see decisions ledger")
def test_in_gap_mode_count_is_even(quarter_modes, quarter_gaps):
    for g in quarter_gaps.open:
        assert len(in_gap_modes(quarter_modes, g)) % 2 == 0


def in_gap_counts(modes, gaps):
    return [len(in_gap_modes(modes, gaps[h])) for h in (1, 3)]


@pytest.mark.xfail(strict=True, reason="disorder shifts edge modes across the gap edges; see decisions ledger")
def test_in_gap_count_unchanged_by_disorder(quarter_spec, quarter_modes, quarter_gaps):
    clean = in_gap_counts(quarter_modes, quarter_gaps)
    for seed in range(5):
        dirty = diagonalize(lattice_hamiltonian(quarter_spec, DisorderSpec(0.05, 0.05, seed)))
        assert in_gap_counts(dirty, find_gaps(dirty, 1, 4)) == clean


def test_disordered_gaps_stay_open_with_edge_modes_only(quarter_spec, quarter_modes, quarter_gaps):
    clean = np.array([len(in_gap_modes(quarter_modes, quarter_gaps[h])) for h in (1, 3)])
    for seed in range(5):
        dirty = diagonalize(lattice_hamiltonian(quarter_spec, DisorderSpec(0.05, 0.05, seed)))
        gaps = find_gaps(dirty, 1, 4)
        assert not gaps[1].closed and not gaps[3].closed
        counts = np.array([len(in_gap_modes(dirty, gaps[h])) for h in (1, 3)])
        # the count moves only through modes near the band edges
        assert np.all(np.abs(counts - clean) <= 0.2 * clean)
        for h in (1, 3):
            assert BSM not in {dirty.tags[i] for i in in_gap_modes(dirty, gaps[h])}
