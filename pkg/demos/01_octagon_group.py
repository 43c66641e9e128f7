"""
The genus-2 octagon group
=========================

Build the Fuchsian group, check the surface relation, and look at a few
closed geodesics through their translation lengths.
"""

import numpy as np

from holoqm.hyp2 import GeodesicTriangle, triangle_area, triangle_area_by_quadrature
from holoqm.surface_group import RELATOR, octagon_rep, relator_residual_mp

rep = octagon_rep()

# the relator should act as the identity, in floats and at 50 digits
print("relator", RELATOR, "distance to identity:", rep.rep_matrix(RELATOR).distance_to_identity())
print("relator residual at 50 digits:", relator_residual_mp(dps=50))

# translation lengths are conjugation invariant and grow along powers
for w in ["a", "ab", "acAC", "aacc", "abcd"]:
    ls = [rep.translation_length(w * n) for n in (1, 2, 3)]
    print(f"{w:>5}  tau = {ls[0]:.6f}  tau(w^2)/tau(w) = {ls[1] / ls[0]:.6f}  tau(w^3)/tau(w) = {ls[2] / ls[0]:.6f}")

# a far point folds back into the fundamental octagon; the word records how
z = rep.rep_matrix("abcDA")(0.1 + 0.05j)
z0, word = rep.dirichlet_reduce(z)
print("far point", z, "reduces to", z0, "via", word)

# every geodesic triangle has area below pi
rng = np.random.default_rng(0)
r = np.tanh(0.5 * rng.uniform(0, 5, (5, 3)))
phi = rng.uniform(0, 2 * np.pi, (5, 3))
for row_r, row_p in zip(r, phi):
    t = GeodesicTriangle(*(row_r * np.exp(1j * row_p)))
    print(f"area {triangle_area(t):.10f}  quadrature {triangle_area_by_quadrature(t):.10f}")
