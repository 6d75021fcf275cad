"""Discrete dislocation-driven rate-independent elasto-plasticity at desk scale."""

__version__ = "0.1.0"

from . import (backend, currents, dissipation, energy, evolve, grid, multivec,
               plastic, scenario, slipfield)

__all__ = ["backend", "currents", "dissipation", "energy", "evolve", "grid",
           "multivec", "plastic", "scenario", "slipfield", "__version__"]
