"""
Command-line interface.
"""

from . import main

__all__ = ["main"]
