"""Link prediction with a structure-modulated graph convolutional network,
anchor-distance node features, classical heuristic baselines and an
evaluation harness."""

__version__ = "0.1.0"
