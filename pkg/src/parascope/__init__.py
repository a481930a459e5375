"""parascope: a paragraph-level workbench for mining scientific papers.

Ingests parsed papers (TEI XML or plain text), retrieves paragraphs by
semantic similarity with positive/negative relevance feedback, trains
multi-label paragraph classifiers over embeddings, and answers questions
from retrieved passages through a pluggable LLM provider.
"""

__version__ = "0.1.0"
