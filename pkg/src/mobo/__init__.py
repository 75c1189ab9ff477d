"""
mobo - constrained multi-objective Bayesian optimization with Gaussian-process
surrogates: qParEGO, qEHVI and fixed-surrogate NSGA-II workflows.
"""

__version__ = "0.1.0"
