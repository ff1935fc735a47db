"""Pool-based active learning benchmark harness for tabular classification."""

__version__ = "0.1.0"
