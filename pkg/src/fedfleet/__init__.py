"""Simulated BEV fleet with federated training of an energy-consumption model.

Pipeline: synthetic drive cycles -> physics-based per-second energy labels ->
sliding-window datasets -> per-vehicle stacked-LSTM training -> FedAvg
aggregation -> evaluation artifacts (convergence traces, cross-client loss
matrix, prediction traces).
"""

__version__ = "0.1.0"

DT = 1.0  # simulation and feature cadence, seconds
