"""Symbolic bug finder for GPU-style kernels (MiniKernel language).

The package splits into the surface language (``minikernel.lang``), the
symbolic core (``minikernel.sym``, ``minikernel.tensor``), the solver
layer (``minikernel.solver``), the path-exploring engine and detectors
(``minikernel.engine``), shape-context inference (``minikernel.context``),
a concrete interpreter used as a replay and differential-testing oracle
(``minikernel.oracle``) and the command line front end
(``minikernel.cli``).
"""

__version__ = "0.1.0"
