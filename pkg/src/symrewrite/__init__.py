"""Seed-sensitivity study of seq2seq generalization on a symbol-rewriting task."""

__version__ = "0.1.0"
