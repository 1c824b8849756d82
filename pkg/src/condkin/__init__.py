"""Simulation and verification toolkit for condensing coagulation-fragmentation
dynamics with square-root interaction kernel: measure-valued deterministic
evolution, stochastic particle dynamics, and a self-similar energy-profile
solver with a quantitative diagnostics suite."""

__version__ = "0.1.0"
