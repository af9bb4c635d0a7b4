"""Search and verification of lattice tilings by limited-magnitude error balls."""

__version__ = "0.1.0"
