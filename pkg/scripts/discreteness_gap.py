"""Regenerate DISCRETENESS_GAP: min distance from +-I over reduced words of length <= 5.

Reduced words of length < 8 are never trivial in the octagon group (the
shortest relator has length 8), so every enumerated word is a nontrivial element.
"""

from holoqm.surface_group import octagon_rep, reduced_words

rep = octagon_rep()
gap = min(rep.rep_matrix(w).distance_to_identity() for w in reduced_words(5))
print(repr(gap))
