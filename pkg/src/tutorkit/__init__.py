"""Course-grounded retrieval question answering toolkit."""

__version__ = "0.1.0"
