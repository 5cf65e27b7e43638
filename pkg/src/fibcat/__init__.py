"""Exact workbench for finite categories.

Fibration classifiers, the correspondence calculus (profunctors, collages,
two-sided discrete fibrations), transport constructions, and truncated
nerve-homology certificates for finality, all over explicit composition
tables.
"""

__version__ = "0.1.0"
