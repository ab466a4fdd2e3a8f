"""Operator kernels, specifications and engine bindings."""
