"""Figure generation from nudge-ns CSV/VTK artifacts."""

__version__ = "0.1.0"
