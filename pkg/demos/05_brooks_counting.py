"""
Counting quasimorphisms on a free group
=======================================

Homogenized Brooks counts separate cyclic subgroups of F(a, b); a nonsingular
table of values certifies that two words have no common powers up to
conjugation.
"""

from holoqm.free_qm import brooks_h, vce_test

for w in ["ab", "abab", "aabb", "abAB", "ba"]:
    print(f"h_ab({w}) = {brooks_h('ab', w)}   h_aabb({w}) = {brooks_h('aabb', w)}")

for pair in [("ab", "aabb"), ("abAB", "a"), ("ab", "abab")]:
    cert = vce_test(*pair)
    print(pair, cert.verdict, cert.rule, [str(v) for v in cert.values])
