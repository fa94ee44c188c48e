"""pfclt: Pfaffian sine-process counting statistics at desk scale.

Correlation functions via Pfaffians, cumulant trace formulas for linear
statistics, finite-rank commutator verification for the Sine1/Sine4 kernels,
and Monte Carlo beta-ensemble cross-checks.
"""

__version__ = "0.1.0"
