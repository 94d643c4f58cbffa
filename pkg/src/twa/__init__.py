"""Targeted wearout analysis for gate-level netlists.

Select near-critical paths, generate NBTI-stressing input patterns for them,
quantify aging acceleration and time to failure, and replay the resulting
setup violations in a timed simulator.
"""

__version__ = "0.1.0"
