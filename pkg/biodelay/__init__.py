"""
biodelay - delayed fractional Lotka-Volterra bioreactor toolkit

biodelay combines:
- equilibrium and linearization of the delayed model
- delay-crossing stability windows and sigma-stability regions for a
  delayed proportional controller
- method-of-steps simulation and Levenberg-Marquardt identification

The library lives in biodelay.core; biodelay.cli wires it into batch runs.
"""

__version__ = "0.1.0"
__description__ = "Stability analysis, delayed control and identification of a delayed bioreactor model"
