"""agglab: a desk-scale graph neural network laboratory.

Dense-tensor autodiff, graph datasets with combinatorial oracles,
aggregation-coefficient rank certificates, GNN layers built around
learnable multi-row aggregation, and a small training harness.
"""

from .tensor import Tape, Tensor, finite_diff_check
from .graphs import Graph, Dataset

__version__ = "0.1.0"

__all__ = ["Tape", "Tensor", "finite_diff_check", "Graph", "Dataset", "__version__"]
