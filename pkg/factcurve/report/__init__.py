"""
report package.
Command line, result tables and charts.
"""
