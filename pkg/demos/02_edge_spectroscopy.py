"""Single-site pumping: edge combs in the gaps versus a bulk site.

Run: python3 demos/02_edge_spectroscopy.py
"""

import numpy as np

from cqed_hofstadter.drive import DecaySpec, PumpSpec, spectro_scan, steady_state
from cqed_hofstadter.lattice import LatticeSpec, edge_regions, lattice_hamiltonian
from cqed_hofstadter.spectrum import diagonalize, find_gaps

spec = LatticeSpec(p=1, q=4)
H = lattice_hamiltonian(spec)
gaps = find_gaps(diagonalize(H), 1, 4)
omegas = np.arange(-3.2, 3.2, 0.005)

for label, site, P in [("outer edge", (1, 24), 0.5), ("inner edge", (9, 13), 0.25), ("bulk", (5, 13), 0.23)]:
    scan = spectro_scan(H, site, P, omegas)
    counts = [len(scan.peaks_in(gaps[h].lower, gaps[h].upper)) for h in (1, 3)]
    in_gap = np.zeros_like(omegas, dtype=bool)
    for h in (1, 3):
        lo, hi = gaps[h].interior(0.5)
        in_gap |= (omegas > lo) & (omegas < hi)
    ratio = scan.values[in_gap].max() / scan.values.max()
    print(f"{label:10s} site {site}: {len(scan.peaks)} peaks, gap 1/3 peaks {counts}, "
          f"gap-centre response {ratio:.2%} of maximum")

state = steady_state(H, PumpSpec.single((1, 24), 0.5, 1.47), DecaySpec.for_pump(H, [(1, 24)]))
outer, inner = edge_regions(spec, 2)
n = state.photon_numbers / state.photon_numbers.sum()
print(f"\nsteady state at 1.47: {n[outer].sum():.1%} near the outer boundary, {n[inner].sum():.1%} near the hole")
