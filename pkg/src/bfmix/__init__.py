"""bfmix: numerics for a dilute Bose gas coupled to a Fermi sea on the torus.

Subpackages
-----------
lattice     Fermi-ball enumeration, lune resolvent sums, line-sum asymptotics.
potentials  Band-limited potentials on the torus and the fermion-mediated
            effective pair potential.
scattering  Zero-energy radial scattering, critical couplings, collapse scan.
fock        Truncated Bose-Fermi Fock bases, excitation operators,
            particle-hole structure checks.
spectra     Eigensolvers, effective-vs-full spectrum comparison, trial-state
            energies, quadratic-form decompositions.
cli         Command-line entry points (``bfmix``).
"""

__version__ = "0.1.0"
