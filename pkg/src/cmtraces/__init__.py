"""Twisted traces of CM values for modular and harmonic Maass forms.

Subpackages split along the pipeline: exact q-series oracles (qseries),
binary quadratic form classes and genus characters (quadforms), direct
evaluation of classical modular functions (modeval), Poincare series and
theta-lift constants (poincare), trace assembly and duality residuals
(traces), and the verification command line (cli). numkernel carries the
precision context and special-function kernels everything else shares.
"""

__version__ = "0.1.0"
