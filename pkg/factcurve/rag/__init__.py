"""
rag package.
Corpus chunking, lexical retrieval and context-augmented biography prompts.
"""
