"""
Almost-representations far from representations
================================================

One tube on the loop of b = acAC makes q(b)^m = g while every generator maps
to the identity.  A genuine representation then sends b to the identity, yet
q(b)^m stays at g.  The defect of the construction falls like 1/m.
"""

import math
import warnings

import numpy as np

from holoqm.lie_targets import SU2, su2_cyclic_subgroup_diameter
from holoqm.quasimorphism import kazhdan_pairs, kazhdan_scaling

su2 = SU2()
g = su2.exp([0.0, 0.0, 0.45 * 4 * math.pi])
print("d(g, 1) =", su2.distance(g, su2.identity()), " Z/3 diameter =", su2_cyclic_subgroup_diameter(3))

# b and d are not covered by a free-group certificate against acAC; silence the notice
warnings.simplefilter("ignore", UserWarning)
pairs, family = kazhdan_pairs(np.random.default_rng(0), 1, (2, 3, 4), 6)
rep = kazhdan_scaling(["a", "b", "c", "d"], "acAC", g, 8, su2, pairs, family, doublings=2)
for row in rep.scaling:
    print(f"m={row['m']:3d}  epsilon={row['epsilon']:.4e}  ratio={row.get('ratio', float('nan')):.4f}  d(q(b)^m, g)={row['b_power_check']:.1e}")
print("certificate:", rep.certificate)
