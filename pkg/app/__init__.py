# app/__init__.py
"""Regional inertia toolkit: nodal inertia, coherent regions and swing-equation checks."""

__version__ = "0.3.0"
