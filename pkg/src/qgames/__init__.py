"""Deterministic two-player quantitative games of infinite duration.

A library and command-line tool for building finitely branching (possibly
infinite) weighted arenas, evaluating quantitative objectives, running
strategies against each other, constructing opponents that defeat
insufficient memory models, and synthesizing step-counter and
step-counter-plus-one-bit strategies with checkable certificates.
"""

__version__ = "1.0.0"
