"""Conditioned process simulation toolkit.

Discovers declarative constraints from event logs, trains a conditioned
recurrent network on constraint-augmented traces, and simulates new traces
under user-edited constraint vectors.
"""

__version__ = "0.1.0"
