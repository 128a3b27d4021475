"""Censuses of hypersurfaces over small finite fields.

Modules: ``ffla`` (finite fields and linear algebra), ``symspace`` (forms and
the linear action), ``orbital`` (orbits and stabilizers), ``hypergeo``
(smoothness, lines, planes, conics), ``zetakit`` (point counts and zeta
functions) and ``censusctl`` (command line).
"""

__version__ = "0.1.0"
