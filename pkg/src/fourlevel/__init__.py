"""Cascade emission and four-wave-mixing conversion in four-level atomic ensembles.

Submodules
----------
sde_core          Stratonovich midpoint integration and the Kubo oscillator check
few_atom          master equation for up to four dipole-coupled atoms
analytic_cascade  geometric factor, collective decay, two-photon spectra
schmidt           Schmidt modes and entanglement entropy
dlcz              swap fidelity and success probabilities for a repeater link
conversion        diamond-scheme frequency conversion (closed form, optimizer, pulses)
cascade_sim       positive-P stochastic Maxwell-Bloch simulation of the cascade
cli               command-line front end
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
