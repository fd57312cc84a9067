"""
Witten rates: spectral gaps of the diffusion-in-potential generator
Computes the gap of the Witten-Schrodinger operator and compares it with
semiclassical, Arrhenius, Eyring and exact surface-formula rate estimates.
"""

import logging

__version__ = "1.0.0"
__all__ = ["__version__"]

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())
