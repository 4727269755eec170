"""Wideband sonar echo synthesis, form-function estimation and filler
classification for fluid-filled elastic spherical shells."""

__version__ = "0.1.0"

FS_DEFAULT = 1.0e6
BAND_HZ = (30.0e3, 160.0e3)
