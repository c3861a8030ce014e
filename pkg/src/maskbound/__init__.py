"""Throughput bounds and simulation for keyed communication that hides a channel state."""

__version__ = "0.1.0"
