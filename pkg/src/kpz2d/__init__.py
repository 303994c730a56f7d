"""Numerical laboratory for the renormalized (2+1)-dimensional KPZ equation
on the torus: mollified-noise SPDE solvers, a Feynman-Kac polymer Monte
Carlo with tilted measures, Wiener-chaos statistics of the averaged height,
and negative-Holder moment diagnostics.
"""

from . import (analytic_oracles, chaos_analysis, errors, experiment_cli,
               noise_field, polymer_mc, regularity_probe, spde_solvers)

__version__ = experiment_cli.VERSION

__all__ = [
    "analytic_oracles", "chaos_analysis", "errors", "experiment_cli",
    "noise_field", "polymer_mc", "regularity_probe", "spde_solvers",
]
