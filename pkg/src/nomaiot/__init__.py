"""NOMA vs OMA performance analysis and link/system simulation for grant-free massive IoT."""
from ._backend import NAME as backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]
