"""Iwasawa continued fractions over explicit lattices.

Submodules: ``scalar`` (exact Q(sqrt D)), ``algebra`` (R, C, H, O and
inversions), ``lattice`` (catalog, Dirichlet regions, property checks),
``cf`` (the map T, expansions, alpha-CFs, Jacobians), ``has`` (hyperplanes
and spheres), ``serendipity`` (boundary orbits and components),
``density`` (Ulam and Birkhoff estimates), ``render`` and ``cli``.
"""

__version__ = "0.1.0"

__all__ = ["algebra", "cf", "density", "has", "lattice", "render", "scalar", "serendipity", "__version__"]
