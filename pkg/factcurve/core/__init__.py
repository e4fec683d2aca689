"""
Core package.
Shared domain vocabulary and relative-position aggregation.
"""
