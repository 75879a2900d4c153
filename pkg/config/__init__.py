"""
Configuration package for schurkit.

This package contains the default YAML configuration, the tolerance and
settings loader, and the registry of named built-in operators.
"""
