"""
judging package.
Prompting protocols through which a model judges its own atomic claims, and the scores built on them.
"""
