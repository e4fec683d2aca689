"""
Utilities package.
Contains logging, configuration, errors and prompt assets.
"""
