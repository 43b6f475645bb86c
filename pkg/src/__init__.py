"""
Offline Contextual Bandit Benchmark

Counterfactual Sample Identification, the Direct Method and LS-IPS compared
on synthetic bit-vector environments with an exact reward oracle.
"""

__version__ = "0.1.0"
