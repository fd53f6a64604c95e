"""Simulation and verification toolkit for q-pushTASEP and its cylindric LPP / Meixner representations."""

__version__ = "0.1.0"
