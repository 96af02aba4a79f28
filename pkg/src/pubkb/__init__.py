"""pubkb: a personal knowledge base for a researcher's publications.

Ingests publication files, indexes them for lemma-aware full-text search,
builds ontology graphs from the corpus, harvests metadata from external
sources, and exposes everything through a JSON/REST service and a CLI.
"""

__version__ = "0.1.0"
