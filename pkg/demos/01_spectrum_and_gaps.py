"""Spectrum of the holed lattice at quarter flux, its gaps, and who lives in them.

Run: python3 demos/01_spectrum_and_gaps.py
"""

from collections import Counter

from cqed_hofstadter.lattice import LatticeSpec, lattice_hamiltonian
from cqed_hofstadter.spectrum import diagonalize, find_gaps, in_gap_modes
from cqed_hofstadter.topology import chern_fhs, chern_numbers_diophantine, diophantine_windings

spec = LatticeSpec(p=1, q=4)
modes = diagonalize(lattice_hamiltonian(spec))
print(f"{spec.n_sites} sites, {len(modes.eigenvalues)} modes, "
      f"E in [{modes.eigenvalues.min():.3f}, {modes.eigenvalues.max():.3f}]")
print("mode tags:", dict(Counter(modes.tags)))

gaps = find_gaps(modes, spec.p, spec.q)
for g in gaps.gaps:
    tags = Counter(modes.tags[i] for i in in_gap_modes(modes, g))
    state = "closed" if g.closed else "open"
    print(f"gap {g.h}: [{g.lower:+.3f}, {g.upper:+.3f}] {state:6s} in-gap modes {dict(tags)}")

print("\nwindings t_h from h = s q + t p:")
for p, q in [(1, 4), (1, 5)]:
    print(f"  {p}/{q}:", [(w.h, w.t, "degenerate" if w.degenerate else "") for w in diophantine_windings(p, q)])

print("\nChern numbers, two routes:")
print("  1/5 windings :", [r.C for r in chern_numbers_diophantine(1, 5)])
print("  1/5 Berry    :", [r.C for r in chern_fhs(1, 5)])
print("  1/4 composite:", [(r.bands, r.C) for r in chern_fhs(1, 4, merge_touching=True)])
