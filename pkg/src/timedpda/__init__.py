"""Timed-register pushdown automata: orbit-finite definable sets,
dense-timed PDA reductions, and emptiness via equations over sets of
integers."""

__version__ = "0.1.0"
