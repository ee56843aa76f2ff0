"""Propagation-of-chaos laboratory.

Interacting particle systems with bounded, singular and moderate kernels,
their McKean-Vlasov limits computed by deterministic Fokker-Planck solvers,
and the measurement layer used to compare the two.
"""

__version__ = "0.1.0"
