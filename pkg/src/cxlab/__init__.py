"""Hyperfine-changing charge exchange in a trapped ion-atom system.

Spin-projection algebra, trap kinematics, a passage Monte Carlo, a classical
binary-collision integrator and the rate inference that links them.
"""
__version__ = "0.1.0"
