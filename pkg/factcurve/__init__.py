"""
factcurve package initializer.
Measures long-form factuality across relative positions and estimates it from model self-judgment.
"""

__version__ = "0.1.0"
