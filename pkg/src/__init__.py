"""
Source package for the meshgrade toolkit.

This package contains the mesh quality library and the command-line
application built on top of it.
"""

__version__ = '0.1.0'
