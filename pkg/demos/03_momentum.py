"""Phase-gradient pumping along the outer edge resolves the edge-mode momentum.

Run: python3 demos/03_momentum.py
"""

from cqed_hofstadter.drive import edge_phase_gradient, momentum_scan
from cqed_hofstadter.lattice import LatticeSpec, lattice_hamiltonian, top_edge_sites

H = lattice_hamiltonian(LatticeSpec(p=1, q=4))
for omega in (1.67, 1.69):
    print(f"omega = {omega}")
    for m in range(1, 6):
        sites = top_edge_sites(m)
        scan = momentum_scan(H, sites, 0.1, omega)
        E, k0 = edge_phase_gradient(H, omega, sites)
        width = "flat" if m == 1 else f"fwhm {scan.fwhm:.3f}"
        print(f"  m={m}: argmax k {scan.k_peak:.3f}, nearest mode E={E:.4f} k0={k0:.3f}, {width}")
