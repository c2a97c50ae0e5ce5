"""Prompt assembly and agent-program generation backends."""
