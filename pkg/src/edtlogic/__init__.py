"""Exact float arithmetic, temporal logic, encoder-decoder transformers and
capped-multiset automata over two-sorted word graphs, with translations
between the three model kinds and an exhaustive differential tester."""

__version__ = "0.1.0"
