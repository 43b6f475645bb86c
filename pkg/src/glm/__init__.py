"""Generalized linear models: feature maps, linear scorers and their optimizer."""
