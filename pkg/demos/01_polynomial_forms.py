"""Polynomial differential forms on one simplex.

Walks through the exact form algebra: exterior derivative, Hodge star,
codifferential, the centered contraction operator, traces and exact
integration, and shows the structural identities they satisfy.
"""

import numpy as np

from padfeec.forms import (
    CellGeometry,
    PolyForm,
    codifferential,
    exterior_derivative,
    hodge_star,
    integral_over_subsimplex,
    koszul,
    l2_inner,
    multiindices,
    random_polyform,
    stokes_boundary_integral,
)

print("=== polynomial k-forms in the plane ===\n")

x_dy = PolyForm.coordinate(2, 0).wedge(PolyForm.basis_form(2, (1,)))
print("x dy                :", x_dy)
print("d(x dy)             :", exterior_derivative(x_dy))
print("star dx             :", hodge_star(PolyForm.basis_form(2, (0,))))
print("star dy             :", hodge_star(PolyForm.basis_form(2, (1,))))

vol = PolyForm.basis_form(2, (0, 1))
print("contraction of vol  :", koszul(vol), " (the rotational field)")
print("d contraction of vol:", exterior_derivative(koszul(vol)), " = 2 vol\n")

print("=== adjointness of d and delta, cell by cell ===\n")
rng = np.random.default_rng(1)
cell = CellGeometry(rng.standard_normal((3, 2)))
w = random_polyform(2, 0, 1, rng)
mu = random_polyform(2, 1, 1, rng)
lhs = l2_inner(exterior_derivative(w), mu, cell) - l2_inner(w, codifferential(mu), cell)
boundary = stokes_boundary_integral(w.wedge(hodge_star(mu)), cell)
print("<dw, mu> - <w, delta mu> = %.15f" % lhs)
print("boundary pairing         = %.15f" % boundary)
print("difference               = %.2e  (integration by parts is exact)\n" % abs(lhs - boundary))

print("=== exact integration against a spot check ===\n")
tri = CellGeometry([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
lam1, lam2 = tri.barycentric(1), tri.barycentric(2)
print("integral of lambda_1 lambda_2 over the unit right triangle:",
      l2_inner(lam1, lam2, tri), " (equals 1/24)")

print("\n=== traces: the edge form of an edge integrates to one ===\n")
from padfeec.local import whitney_form

form = whitney_form(tri, (0, 1))
print("edge (0,1):", integral_over_subsimplex(form, tri.vertices[[0, 1]]))
print("edge (0,2):", integral_over_subsimplex(form, tri.vertices[[0, 2]]))

print("\nmulti-index families: ", {(k): multiindices(k, 3) for k in range(4)})
