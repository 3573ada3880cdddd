"""Squeezed thermal states two ways: closed-form covariances and the truncated
photon-number rendering, compared quantity by quantity.

The running example is the squeezed-state model inferred from the measurement
record: squeezed variance 0.484 of vacuum, anti-squeezed 20.17, i.e.
(0.242, 10.085) quanta.  Run:  python demos/01_squeezed_states_and_wigner.py
"""

import numpy as np

from quadratomo import fock, gaussian

V_X, V_P = 0.242, 10.085

print("=== closed-form side ===")
state = gaussian.squeezed_thermal(V_X, V_P)
print(f"variance at the squeezed axis      {gaussian.variance_at(state, 0.0):.4f} quanta")
print(f"variance at the anti-squeezed axis {gaussian.variance_at(state, np.pi/2):.4f} quanta")
nu = gaussian.symplectic_eigenvalues(state.cov)[0]
print(f"symplectic eigenvalue              {nu:.4f}  -> purity {1/(2*nu):.4f}, "
      f"entropy {gaussian.entropy_g(nu):.4f} bits")

v_s, f_max = gaussian.best_pure_squeezed(V_X, V_P)
print(f"closest pure squeezed vacuum: min variance {v_s:.4f} quanta "
      f"({v_s/0.5:.1%} of vacuum), fidelity {f_max:.4f}")

print("\n=== photon-number side (cutoff 30) ===")
rho = fock.gaussian_to_fock(state)
lo, hi = fock.extremal_variances(rho)
print(f"rendered variances                 {lo:.4f} / {hi:.3f} quanta")
print(f"purity {fock.purity(rho):.4f}, entropy {fock.von_neumann_entropy(rho):.4f} bits")
psi, f = fock.best_pure_squeezed_fock(rho)
print(f"scan over pure squeezed vacua: fidelity {f:.4f}")
print("note: ~1% of this state's photon distribution lies past 30 photons,")
print("which is why the anti-squeezed variance lands below the closed form")

print("\n=== Wigner function ===")
ax = np.linspace(-10, 10, 161)    # the anti-squeezed axis needs ~3 sigma = 9.5
grid = fock.wigner(rho, ax, ax)
print(f"W(0,0) = {grid.values[80, 80]:.4f}  (vacuum would be 1/pi = {1/np.pi:.4f})")
print(f"grid Riemann sum = {grid.riemann_sum():.4f}")
neg = fock.wigner(fock.fock_state(1), np.array([0.0]), np.array([0.0]))
print(f"single photon W(0,0) = {neg.values[0,0]:.4f}  (negativity, = -1/pi)")

print("\n=== entanglement from two copies ===")
pure = fock.squeezed_vacuum_pure(0.030, 60).to_density_matrix()
ci = fock.coherent_information(pure)
print(f"two ratio-0.060 squeezed vacua on a balanced beamsplitter: "
      f"{ci:.3f} e-bits of coherent information")
print(f"closed form: {gaussian.gaussian_coherent_information(0.030, 0.25/0.030):.3f}")
ci_mixed = fock.coherent_information(rho)
print(f"two copies of the mixed state above: {ci_mixed:.3f} e-bits "
      "(entanglement survives the thermal noise only in the photon-basis account)")
