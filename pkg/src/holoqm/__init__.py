"""Holonomy quasimorphisms of the genus-2 surface group into Lie groups."""

from holoqm.connection import BallAtom, ConnectionForm, TubeAtom, holonomy, random_ball_form
from holoqm.lie_targets import SU2, Abelian, Heisenberg, get_target
from holoqm.quasimorphism import BG, HBG, QuasimorphismEngine
from holoqm.surface_group import FuchsianRep, Leg, LiftedPoint, octagon_rep

__version__ = "0.1.0"

__all__ = [
    "BG",
    "HBG",
    "SU2",
    "Abelian",
    "BallAtom",
    "ConnectionForm",
    "FuchsianRep",
    "Heisenberg",
    "Leg",
    "LiftedPoint",
    "QuasimorphismEngine",
    "TubeAtom",
    "get_target",
    "holonomy",
    "octagon_rep",
    "random_ball_form",
]
