"""
pipeline package.
Corpus ingestion, generation, filtering, sentence segmentation and claim decomposition.
"""
