"""
Test suite for fpsteer.
"""
