"""
Setup script for fpsteer.

This setup.py is kept for backward compatibility.
The main package configuration is in pyproject.toml.
"""

from setuptools import setup

setup()
