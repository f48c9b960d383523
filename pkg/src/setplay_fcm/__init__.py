"""Parse robot-soccer setplays and group semantically equivalent ones with
two-stage fuzzy c-means."""

__version__ = "0.1.0"
