import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqed_hofstadter.drive import (
    DecaySpec,
    DriveError,
    PumpSpec,
    Resolvent,
    alpha_scan,
    check_consecutive,
    default_kp_grid,
    edge_phase_gradient,
    momentum_scan,
    power_balance,
    spectro_scan,
    steady_state,
)
from cqed_hofstadter.lattice import LatticeSpec, lattice_hamiltonian, top_edge_sites

SINGLE = lattice_hamiltonian(LatticeSpec(Nx=1, Ny=1, nx=0, ny=0, p=0, q=1))
DIMER = lattice_hamiltonian(LatticeSpec(Nx=2, Ny=1, nx=0, ny=0, p=0, q=1))


def test_zero_pump_gives_vacuum(quarter_H):
    state = steady_state(quarter_H, PumpSpec.single((1, 24), 0.0, 1.0), DecaySpec.for_pump(quarter_H, [(1, 24)]))
    assert np.all(state.amplitudes == 0)


@settings(max_examples=100, deadline=None)
@given(
    P=st.floats(1e-3, 10),
    omega=st.floats(-5, 5),
    kappa=st.floats(1e-3, 2),
    method=st.sampled_from(["lu", "eig"]),
)
def test_single_resonator_lorentzian(P, omega, kappa, method):
    state = steady_state(SINGLE, PumpSpec.single((1, 1), P, omega), DecaySpec(np.array([kappa])), method)
    expected = P**2 / (omega**2 + kappa**2 / 4)
    assert state.photon_numbers[0] == pytest.approx(expected, rel=1e-10)


def test_dimer_closed_form():
    T, omega, k1, k2, P = 1.0, 0.7, 0.2, 0.01, 0.5
    state = steady_state(DIMER, PumpSpec.single((1, 1), P, omega), DecaySpec(np.array([k1, k2])))
    d1, d2 = -omega - 0.5j * k1, -omega - 0.5j * k2
    det = d1 * d2 - T * T
    a1 = -P * d2 / det
    a2 = P * T / det
    np.testing.assert_allclose(state.amplitudes, [a1, a2], rtol=1e-12)


def test_linear_response(quarter_H, rng):
    sites = top_edge_sites(3)
    decay = DecaySpec.for_pump(quarter_H, sites)
    p1 = PumpSpec(tuple((s, complex(*rng.normal(size=2))) for s in sites), 1.3)
    p2 = PumpSpec(tuple((s, complex(*rng.normal(size=2))) for s in sites), 1.3)
    s12 = PumpSpec(tuple((s, 2 * a + 3 * b) for (s, a), (_, b) in zip(p1.entries, p2.entries)), 1.3)
    a1 = steady_state(quarter_H, p1, decay).amplitudes
    a2 = steady_state(quarter_H, p2, decay).amplitudes
    a12 = steady_state(quarter_H, s12, decay).amplitudes
    np.testing.assert_allclose(a12, 2 * a1 + 3 * a2, atol=1e-9 * np.abs(a12).max())


@pytest.mark.parametrize("site,omega", [((1, 24), 1.47), ((9, 13), 1.97), ((5, 13), 2.69), ((12, 1), -0.3)])
def test_power_balance_and_routes(quarter_H, site, omega):
    pump = PumpSpec.single(site, 0.3, omega)
    decay = DecaySpec.for_pump(quarter_H, [site])
    lu = steady_state(quarter_H, pump, decay, "lu")
    eig = steady_state(quarter_H, pump, decay, "eig")
    assert lu.residual <= 1e-9 * 0.3
    np.testing.assert_allclose(eig.amplitudes, lu.amplitudes, atol=1e-8 * np.abs(lu.amplitudes).max())
    loss, work = power_balance(quarter_H, pump, decay, lu)
    assert loss == pytest.approx(work, rel=1e-8)


def test_resolvent_routes_agree(quarter_H):
    sites = top_edge_sites(4)
    decay = DecaySpec.for_pump(quarter_H, sites)
    eig, lu = Resolvent(quarter_H, decay, sites, "eig"), Resolvent(quarter_H, decay, sites, "lu")
    for w in (-2.0, -0.5, 1.67, 3.1):
        np.testing.assert_allclose(eig.block(w), lu.block(w), rtol=1e-8, atol=1e-10)


def test_decay_must_be_positive():
    with pytest.raises(DriveError, match="positive"):
        DecaySpec(np.array([0.1, 0.0]))


def test_pump_on_vacancy_rejected(quarter_H):
    with pytest.raises(DriveError, match="not active"):
        PumpSpec.single((12, 12), 1.0, 0.0).vector(quarter_H)
    with pytest.raises(DriveError):
        spectro_scan(quarter_H, (12, 12), 1.0, [0.0])


def test_empty_axes_rejected(quarter_H):
    with pytest.raises(DriveError, match="empty axis"):
        spectro_scan(quarter_H, (1, 24), 1.0, [])
    with pytest.raises(DriveError, match="empty axis"):
        momentum_scan(quarter_H, top_edge_sites(3), 0.1, 1.67, kps=[])
    with pytest.raises(DriveError, match="empty axis"):
        momentum_scan(quarter_H, [], 0.1, 1.67)


def test_spectro_routes_agree_and_peak_on_resonance(quarter_H):
    omegas = np.arange(-3.2, 3.2, 0.01)
    a = spectro_scan(quarter_H, (1, 24), 0.5, omegas, method="eig")
    b = spectro_scan(quarter_H, (1, 24), 0.5, omegas, method="lu")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-8)
    assert [p.location for p in a.peaks] == [p.location for p in b.peaks]
    assert np.all(a.values > 0)


def test_check_consecutive(quarter_H):
    check_consecutive(quarter_H, top_edge_sites(5))
    check_consecutive(quarter_H, [(9, 9), (10, 9), (11, 9)])
    with pytest.raises(DriveError, match="consecutive"):
        check_consecutive(quarter_H, [(4, 24), (6, 24)])
    with pytest.raises(DriveError, match="same"):
        check_consecutive(quarter_H, [(5, 23), (6, 23)])
    with pytest.raises(DriveError, match="not an active"):
        check_consecutive(quarter_H, [(12, 12)])


def test_single_site_momentum_is_flat(quarter_H):
    scan = momentum_scan(quarter_H, top_edge_sites(1), 0.1, 1.67)
    np.testing.assert_allclose(scan.values, scan.values[0], rtol=1e-12)


def test_momentum_periodic_in_kp(quarter_H):
    ks = default_kp_grid(32)
    a = momentum_scan(quarter_H, top_edge_sites(3), 0.1, 1.67, kps=ks)
    b = momentum_scan(quarter_H, top_edge_sites(3), 0.1, 1.67, kps=ks + 2 * math.pi)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-9)


def test_momentum_routes_agree(quarter_H):
    a = momentum_scan(quarter_H, top_edge_sites(4), 0.1, 1.67, method="lu")
    b = momentum_scan(quarter_H, top_edge_sites(4), 0.1, 1.67, method="eig")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-8)


def test_momentum_width_narrows(quarter_H):
    widths = [momentum_scan(quarter_H, top_edge_sites(m), 0.1, 1.67).fwhm for m in (3, 4, 5)]
    assert widths[0] > widths[1] > widths[2]


def test_edge_phase_gradient_range(quarter_H):
    E, k0 = edge_phase_gradient(quarter_H, 1.67, top_edge_sites(5))
    assert abs(E - 1.67) < 0.05
    assert 0 <= k0 < 2 * math.pi


def test_alpha_scan_flux_quantum_periodicity():
    spec = LatticeSpec(Nx=12, Ny=12, nx=4, ny=4, p=1, q=4)
    sites = [(2, 1), (3, 1), (4, 1)]
    scan = alpha_scan(spec, sites, 0.1, [0.0, 2 * math.pi], np.linspace(-2, -1, 11), threads=1)
    np.testing.assert_allclose(scan.values[0], scan.values[1], rtol=1e-9)
    assert scan.values.shape == (2, 11, 16)
    assert scan.envelope().shape == (2, 11)


def test_alpha_scan_thread_invariant():
    spec = LatticeSpec(Nx=12, Ny=12, nx=4, ny=4, p=1, q=4)
    sites = [(2, 1), (3, 1)]
    args = (spec, sites, 0.1, np.linspace(0, 2 * math.pi, 5), np.linspace(-2, -1, 7))
    assert alpha_scan(*args, threads=1).values.tobytes() == alpha_scan(*args, threads=4).values.tobytes()


def gap_peak_counts(H, gaps, site, strength):
    scan = spectro_scan(H, site, strength, np.arange(-3.2, 3.2, 0.005))
    return np.array([len(scan.peaks_in(gaps[h].lower, gaps[h].upper)) for h in (1, 3)])


@pytest.fixture(scope="module")
def disordered_gap_peaks(quarter_spec, quarter_H, quarter_gaps):
    from cqed_hofstadter.lattice import DisorderSpec

    clean = gap_peak_counts(quarter_H, quarter_gaps, (1, 24), 0.5)
    dirty = [
        gap_peak_counts(lattice_hamiltonian(quarter_spec, DisorderSpec(0.05, 0.05, seed)), quarter_gaps, (1, 24), 0.5)
        for seed in range(5)
    ]
    return clean, dirty


@pytest.mark.xfail(strict=True, reason="disorder moves single resonances across the gap edges; see decisions ledger")
def test_gap_peak_count_unchanged_by_disorder(disordered_gap_peaks):
    clean, dirty = disordered_gap_peaks
    for counts in dirty:
        np.testing.assert_array_equal(counts, clean)


def test_gap_peak_comb_survives_disorder(disordered_gap_peaks):
    clean, dirty = disordered_gap_peaks
    for counts in dirty:
        assert np.all(np.abs(counts - clean) <= 0.2 * clean)
