"""Transparent quasi-symbolic agent built on an actor-critic lunar lander learner."""

__version__ = "0.1.0"
