"""Deterministic particle toolkit for dispersive decay of neutral
two-species Coulomb systems: moment-cancelling initial data, free-transport
oracles, a leapfrog integrator with direct and tree fields, and decay-rate
diagnostics."""

__version__ = "0.1.0"
