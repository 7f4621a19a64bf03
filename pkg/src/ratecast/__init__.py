"""Annual-rate forecasting toolkit: smoothing, ARIMA, diagnostics, reports."""

__version__ = "0.1.0"
