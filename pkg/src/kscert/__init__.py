"""Rigorous-numerics certificates for the Kuramoto-Sivashinsky Fourier ladder.

Everything that claims rigor runs on the directed-rounding interval core in
:mod:`kscert.interval`; numpy/scipy appear only on non-rigorous seed paths
(approximate eigenbases, Newton guesses) and in test oracles.
"""

__version__ = "0.1.0"
