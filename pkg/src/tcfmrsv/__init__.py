"""Time-changed fast mean-reverting stochastic volatility option pricing."""
