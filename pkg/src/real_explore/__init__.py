"""Autonomous exploration engine: local fan planner, graph global planner, active loop closing."""

__version__ = "0.1.0"
