"""Toolkit for validating synthetic NL annotations of derived-column
spreadsheet formulas and evaluating formula-generation models."""

__version__ = "0.1.0"
