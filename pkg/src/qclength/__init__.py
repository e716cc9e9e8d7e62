"""Quenched quantum-correlation lengths of disordered spin-1/2 chains.

Modules
-------
model        Hamiltonian parameters and seeded disorder sampling.
freefermion  Exact quadratic-fermion solution of the XY chain.
ed           Sparse exact diagonalization for small chains.
mps          Two-site DMRG for open XYZ chains.
qcorr        Concurrence, discord and related two-qubit measures.
quench       Disorder averaging with reproducible parallel streams.
fitting      Exponential-decay and power-law fits.
cli          Experiment presets and batch runner.
"""
__version__ = "0.1.0"
