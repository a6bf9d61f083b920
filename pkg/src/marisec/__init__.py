"""UAV friendly-jamming simulator and multi-objective TransSAC toolkit for
LEO-satellite-to-maritime downlinks."""

__version__ = "0.1.0"
