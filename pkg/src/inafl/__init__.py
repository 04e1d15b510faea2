"""Hierarchical federated-learning aggregation over an edge network.

Submodules: ``flcore`` (loss, SGD step, star aggregation), ``ina`` (edge
aggregation and wire format), ``network`` (topology and latency model),
``routing`` (LP relaxation, randomized rounding, baselines, exact search),
``harness`` (scenarios, sweeps, CSV) and ``cli``.
"""
from ._jit import USE_NUMBA, backend_name

__version__ = "0.1.0"
__all__ = ["USE_NUMBA", "backend_name", "__version__"]
