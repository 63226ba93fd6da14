"""
GyroLab - charged-particle orbits, guiding-centre equations and omega sweeps.
"""

__version__ = "1.0.0"
__author__ = "GyroLab contributors"
__description__ = "Guiding-centre simulation lab"
