"""Bang-bang quantum control: propagators, GA pulse synthesis, fixed-point search."""

__version__ = "0.1.0"
