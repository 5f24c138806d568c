"""egret: symbolic-numeric causal perturbation theory for polynomial field functionals."""

__version__ = "0.1.0"
