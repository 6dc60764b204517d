"""propel: from informal specifications to verification-ready SMC queries."""

__version__ = "0.1.0"
