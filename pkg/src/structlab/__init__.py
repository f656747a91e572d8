"""Tabular C51 on a gridworld, learning-dynamics analysis, and structure-guided control."""
