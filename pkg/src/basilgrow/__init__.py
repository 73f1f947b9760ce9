"""Basil growth prediction toolkit for hydroponic sensor streams.

The package covers the full loop of a small vertical-farm study:
synthesizing minute-cadence sensor data with a known growth model,
training linear, feed-forward and recurrent regressors on it, explaining
their predictions with exact Shapley values, and comparing accuracy
against resource cost in a single report.
"""

__version__ = "0.1.0"
