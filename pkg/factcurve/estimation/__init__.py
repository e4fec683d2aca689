"""
estimation package.
Factuality estimated from self-judgment scores, and a claim-stream simulator to check it.
"""
