"""Figure rendering for radialsp CSV artifacts."""

__version__ = "0.1.0"
