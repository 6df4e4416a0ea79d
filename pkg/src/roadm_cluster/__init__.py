"""Blocking analysis and simulation of high-degree ROADM cluster nodes and
the elastic optical networks they serve."""

__version__ = "0.1.0"
