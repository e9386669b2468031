"""Hierarchical active inference navigation in procedurally generated multi-room mazes."""
