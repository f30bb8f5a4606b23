"""Partially adjoint discretizations of exterior-differential operators.

Conforming and nonconforming Whitney-form spaces on simplicial meshes, with
finite-dimensional verification of closed-range indices, Helmholtz and Hodge
decompositions, Poincare-Lefschetz duality as an identity, and the
equivalences between primal and dual discretizations of source, eigenvalue
and Hodge-Laplace problems.
"""

__version__ = "0.1.0"
