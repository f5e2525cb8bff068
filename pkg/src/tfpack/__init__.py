"""Time-frequency packed coherent optical link simulation and evaluation."""

__version__ = "0.1.0"
