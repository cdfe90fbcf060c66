"""Bayesian structure learning of Gaussian DAGs under general (soft, parent-changing) interventions."""
from __future__ import annotations

__version__ = "0.1.0"
