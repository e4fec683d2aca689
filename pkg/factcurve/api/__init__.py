"""
API integrations package.
Handles communication with chat-completion model providers and the replay cache.
"""
