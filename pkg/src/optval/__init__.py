"""Optimal value functions of parametric problems and their viscosity theory checks."""

__version__ = "0.1.0"
