"""Uplink power control for cell-free massive MIMO networks.

Submodules are imported on demand; importing the package itself stays
cheap so the command line can configure threading first.
"""

__version__ = "0.1.0"
