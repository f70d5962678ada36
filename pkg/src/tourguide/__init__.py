"""Desk-scale autonomous museum guide: world model, navigation simulator,
LLM dialogue with function calling, tour engine, personas, analytics, and a
live session gateway."""

__version__ = "0.1.0"
