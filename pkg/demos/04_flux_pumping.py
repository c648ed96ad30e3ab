"""Threading flux through the hole moves edge resonances across a gap.

The number of resonances crossing per flux quantum is the winding number.
Each scan takes 10 to 30 seconds.

Run: python3 demos/04_flux_pumping.py
"""

import numpy as np

from cqed_hofstadter.drive import alpha_scan
from cqed_hofstadter.lattice import LatticeSpec, lattice_hamiltonian
from cqed_hofstadter.spectrum import diagonalize, find_gaps
from cqed_hofstadter.topology import diophantine_winding, extract_winding

OUTER = [(4, 1), (5, 1), (6, 1), (7, 1), (8, 1)]
INNER = [(9, 9), (10, 9), (11, 9), (12, 9), (13, 9)]

for q, h, label, sites in [(4, 1, "outer", OUTER), (4, 1, "inner", INNER), (5, 2, "outer", OUTER)]:
    spec = LatticeSpec(p=1, q=q)
    window = find_gaps(diagonalize(lattice_hamiltonian(spec)), 1, q)[h].interior(0.8)
    omegas = np.arange(window[0] - 0.05, window[1] + 0.05, 0.0025)
    scan = alpha_scan(spec, sites, 0.1, np.linspace(0, 2 * np.pi, 17), omegas)
    est = extract_winding(scan, window)
    expected = diophantine_winding(1, q, h).t * (1 if label == "outer" else -1)
    print(f"1/{q} gap {h} {label}: flow {est.flow:+.3f} -> t = {est.t:+d} (expected {expected:+d})")
