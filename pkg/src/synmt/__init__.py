"""synmt: syntax-aware neural machine translation at desk scale."""

__version__ = "0.1.0"
