"""Numerical laboratory for the G/GI/N queue in the Halfin-Whitt regime.

Modules: ``distributions`` (service and residual laws), ``quadrature`` (grids,
paths, Stieltjes convolution), ``regulator`` (the map ``phi_B^a``),
``renewal``, ``fluid``, ``diffusion``, ``simulator`` (discrete-event FCFS
queue), ``acceptance`` and ``cli``.
"""
from .distributions import Distribution, from_config
from .quadrature import Path, TimeGrid

__all__ = ["Distribution", "Path", "TimeGrid", "from_config"]
