"""Equilibration of coarse observables in spin chains with non-commuting charges."""

__version__ = "0.1.0"
