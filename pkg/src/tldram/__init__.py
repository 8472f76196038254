"""Trace-driven simulator of tiered-latency (segmented-bitline) DRAM."""

__version__ = "0.1.0"
