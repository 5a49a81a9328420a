"""Density-matrix simulator for a three-carbon phase-code QEC experiment.

Modules
-------
linalg    dense operator helpers (exponentials, partial trace)
spins     spin register, Hamiltonian and coherence orders
code      encoder, decoder, correction and syndrome readout
noise     coherent, dephasing, natural-evolution and dispersion channels
protocol  pseudopure preparation and one-/two-round drivers
grape     robust GRAPE pulse design
config    experiment configuration parser
sweep     delay sweeps, CSV output and quadratic fits
"""

__version__ = "0.1.0"
