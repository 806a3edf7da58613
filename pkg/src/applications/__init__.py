"""
Applications built on the meshgrade toolkit.

This package contains the command-line front end that drives the mesh
quality pipeline from files on disk.
"""

from .cli import MeshgradeApp, build_parser, main

__all__ = ['MeshgradeApp', 'build_parser', 'main']
