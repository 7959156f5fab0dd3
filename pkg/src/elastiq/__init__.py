"""Time-varying price elasticity estimation with shared-cell (Siamese) LSTM networks."""

__version__ = "0.1.0"
