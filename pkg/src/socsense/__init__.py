"""Social sensing toolkit: Bayesian social learning, quickest detection with
herding agents, dynamic random graphs, SIS mean-field tracking, glass-ceiling
metrics and network polling."""

__version__ = "0.1.0"
