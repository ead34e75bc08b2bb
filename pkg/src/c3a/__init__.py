"""Collaborative wheelchair-navigation testbed.

A human driver and an autonomous navigator steer one simulated wheelchair
through a maze; a cognitive-score-derived priority policy and a
distance-to-goal trend decide when the machine takes over.
"""

__version__ = "0.1.0"
