"""Preference-based reward learning with natural-language rationales.

Learns trajectory reward models from pairwise preferences whose labels come
with short free-text reasons. Each reason's frozen embedding acts as a
projection axis: the reward decomposes into a rationale-aligned part that
must carry the preference signal and an orthogonal remainder that must not,
which suppresses spurious correlations and lets reward knowledge transfer
across tasks that share reasons.
"""

__version__ = "0.1.0"
