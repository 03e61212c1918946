"""GitHub issue label classification with classic and recurrent models."""

__version__ = "0.1.0"
