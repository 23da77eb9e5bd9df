"""Counting path-cover subgraphs of digraphs through slice tree automata."""

__version__ = "0.1.0"
