"""Simulation and resource-estimation toolkit for partially fault-tolerant analog rotations."""

__version__ = "0.1.0"
