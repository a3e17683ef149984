"""Operating characteristics and sample-size search for Bayesian trial designs."""

__version__ = "0.1.0"
