"""Monte Carlo simulator and analytical rate-loss bounds for limited-feedback RIS-aided NOMA."""

__version__ = "0.1.0"
