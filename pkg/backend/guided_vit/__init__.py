"""Pose-guided multi-task video transformer.

A desk-scale, trainable video transformer that predicts an action class and
human-pose heatmaps from a clip, prunes and merges visual tokens under the
guidance of the class and pose tokens, and ships an analytic FLOP model of
the full architecture.
"""

__version__ = "1.0.0"
