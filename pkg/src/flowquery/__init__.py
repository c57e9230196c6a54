"""Natural-language query engine for subset-flow dataflow diagrams."""

__version__ = "0.1.0"
