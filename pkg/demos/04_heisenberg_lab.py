"""
A Heisenberg quasimorphism that does not reduce to a homomorphism
=================================================================

Tubes prescribe integer lattice values on two classes, keep q(a) = q(c) = 1,
and leave q(a^i c^j) off the centre.  Its projection to the abelianization
then grows exactly linearly along powers.  Rounding to the integer lattice
moves every value by at most the covering radius.
"""

import numpy as np

from holoqm.lie_targets import HEISENBERG_COVERING_RADIUS, LATTICE_GENERATORS
from holoqm.quasimorphism import nonconstructible_lab, random_pairs
from holoqm.surface_group import random_word

rng = np.random.default_rng(2)
words = [random_word(rng, int(rng.integers(1, 7))) for _ in range(100)]
engine, rep = nonconstructible_lab(
    ["acAC", "aacc"], LATTICE_GENERATORS, exponent_pairs=((1, 2), (2, 3)), n_max=8,
    lattice_words=words, lattice_pairs=random_pairs(rng, range(2, 5), 5),
)
print("residuals on prescribed classes:", [f"{r:.1e}" for r in rep.residuals])
print("q(a), q(c) distance to identity:", [float(v) for v in rep.trivial_values.values()])
for c, g in zip(rep.centrality, rep.growth):
    print(f"a^{c['i']} c^{c['j']} = {c['word']}: central={c['is_central']}  projection={np.round(c['projection'], 6)}  exactly linear={g['exact_linear']}")
print("rounding distance:", round(rep.lattice["equivalence_distance"], 6), "<= covering radius", HEISENBERG_COVERING_RADIUS)
