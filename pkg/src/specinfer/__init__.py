"""Spectral inference of effective transport operators.

Subpackages: :mod:`specinfer.spectral` (Fourier model of the generalized
advection-diffusion equation), :mod:`specinfer.calibration`,
:mod:`specinfer.highfid` (2D Darcy/transport data model),
:mod:`specinfer.interrogation` and :mod:`specinfer.io`.
"""

__version__ = "0.1.0"
