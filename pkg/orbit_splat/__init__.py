"""
orbit-splat
Fits an animatable 3D Gaussian human to a calibrated orbital image sequence
"""

__version__ = "0.1.0"
