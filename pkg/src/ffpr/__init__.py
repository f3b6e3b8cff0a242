"""Far-field phase retrieval toolkit: symmetry breaking, metrics, baseline solver."""

__version__ = "0.1.0"
