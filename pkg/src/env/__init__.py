"""Synthetic bandit environments: bit-vector spaces and the logistic oracle."""
