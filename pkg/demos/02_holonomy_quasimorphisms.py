"""
Holonomy quasimorphisms
=======================

A connection on the surface, made of a few smooth bumps, turns every group
element into a holonomy.  Along basepoint geodesics this gives a
quasimorphism; along free geodesic loops it gives a homogeneous one.
"""

import numpy as np

from holoqm.connection import random_ball_form
from holoqm.lie_targets import Heisenberg, SU2
from holoqm.quasimorphism import BG, HBG, QuasimorphismEngine, bound_estimate, equivalence_distance, random_pairs, ulam_defect
from holoqm.surface_group import random_word

rng = np.random.default_rng(1)
form = random_ball_form(SU2(), rng, 4, radius=0.4, amplitude=0.05)
bg = QuasimorphismEngine(form, BG)
hbg = QuasimorphismEngine(form, HBG)

print("q(ab) =\n", np.round(bg("ab"), 6))

# the defect d(q(xy), q(x) q(y)) stays bounded as the words get longer
pairs = random_pairs(rng, range(2, 9), 12)
rep = ulam_defect(bg, pairs, n_boot=200)
print("per-length max defect:", {k: f"{v:.2e}" for k, v in sorted(rep.per_length.items())})
print("bound estimate:", f"{rep.bound_estimate:.3e}", " slope interval:", rep.slope_interval)

# the homogeneous version is a homomorphism on each cyclic subgroup
w = "aBcD"
for n in (1, 2, 3):
    print(f"n={n}  q(w^n) == assembled power: {np.array_equal(hbg(w * n), hbg.hbg_power(w, n))}")

# and stays a bounded distance from the basepoint version
words = [random_word(rng, int(rng.integers(1, 9))) for _ in range(40)]
print("max d(BG, HBG):", f"{equivalence_distance(bg, hbg, words):.3e}", " K4 estimate:", f"{bound_estimate(form, 4)[1]:.3e}")

# in the Heisenberg group the defect lands near the centre
hform = random_ball_form(Heisenberg(), rng, 4, radius=0.4, amplitude=0.2)
he = QuasimorphismEngine(hform, BG)
x, y = "abc", "Dab"
d = Heisenberg().mul(Heisenberg().inv(he(x + y)), Heisenberg().mul(he(x), he(y)))
print("Heisenberg defect element:\n", np.round(d, 6))
