"""Numerical lab for optimally tuned bridge (l_q penalised least squares)
regression: proximal maps, scalar risk, state evolution, closed-form
expansions and finite-size Monte Carlo."""

__version__ = "0.1.0"
