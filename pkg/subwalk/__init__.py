"""
A library and command line tool for discrete-time subordinated random walks:
Bernstein functions, subordinator laws, exact transition kernels and the
numerical verification of their limit theorems.
"""
from ._version import __version__
