"""Even periodic traveling waves of the nonlocal Degasperis-Procesi equation.

Subpackages by responsibility:

- :mod:`dpwaves.spectral`     grid, kernels K and K_P, the operator L
- :mod:`dpwaves.equation`     steady equation, residual, Jacobian
- :mod:`dpwaves.bifurcation`  dispersion relation, branch coefficients, seeds
- :mod:`dpwaves.continuation` pseudo-arclength branch tracing
- :mod:`dpwaves.analysis`     wave-property checks and crest diagnostics
- :mod:`dpwaves.branchio`     newline-delimited branch persistence format
- :mod:`dpwaves.cli`          command-line interface
"""

__version__ = "0.1.0"
