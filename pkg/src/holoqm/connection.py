"""Equivariant Lie-algebra valued 1-forms on the genus-2 surface and their holonomy.

A connection form is a finite sum of compactly supported atoms on the
trivial bundle, each repeated over all deck translates.  Holonomy solves the
transport equation ``Y' = -Y theta(gamma')`` from ``Y(0) = 1``, so the
abelian case gives ``exp(-int theta)`` and holonomy along a concatenation is
the ordered product ``Hol(p1) Hol(p2)``.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from holoqm.hyp2 import GeodesicSegment, Moebius, check_point, dist
from holoqm.lie_targets import Abelian, Target
from holoqm.surface_group import (
    OCTAGON_CIRCUMRADIUS,
    ConjClassRep,
    FuchsianRep,
    Leg,
    LiftedPoint,
    inverse,
    octagon_rep,
    reduce,
)

TUBE_FLAT = 0.05
MAX_STEPS = 2**20
_SQ3 = math.sqrt(3.0)


class IntegrationError(RuntimeError):
    pass


class PlacementError(RuntimeError):
    pass


class ConstructionError(RuntimeError):
    pass


def bump(r, rho):
    """``(1 - (r/rho)^2)^3`` inside ``|r| < rho``, zero outside."""
    t = 1.0 - (np.asarray(r, dtype=float) / rho) ** 2
    return np.where(t > 0.0, t, 0.0) ** 3


def smoothstep_derivative(sigma, delta: float = TUBE_FLAT):
    """Derivative of the quintic smoothstep rescaled to ``[delta, 1 - delta]``."""
    w = 1.0 - 2.0 * delta
    t = np.clip((np.asarray(sigma, dtype=float) - delta) / w, 0.0, 1.0)
    return 30.0 * t * t * (1.0 - t) ** 2 / w


def smoothstep(sigma, delta: float = TUBE_FLAT):
    w = 1.0 - 2.0 * delta
    t = np.clip((np.asarray(sigma, dtype=float) - delta) / w, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _pull(m: Moebius, z, v):
    """Image of points ``z`` and tangents ``v`` under ``m``."""
    return m(z), m.derivative(z) * v


def fermi(w):
    """Fermi coordinates ``(s, r)`` about the real diameter (arclength, signed distance)."""
    x, y = w.real, w.imag
    q = x * x + y * y
    s = np.arctanh(np.clip(2.0 * x / (1.0 + q), -1.0, 1.0))
    r = np.arcsinh(2.0 * y / (1.0 - q))
    return s, r


def fermi_ds(w, dw):
    """``ds(dw)`` for the arclength coordinate of ``fermi``."""
    x, y = w.real, w.imag
    d = 1.0 + x * x + y * y
    f = 2.0 * x / d
    gx = 2.0 * (1.0 - x * x + y * y) / (d * d)
    gy = -4.0 * x * y / (d * d)
    return (gx * dw.real + gy * dw.imag) / (1.0 - f * f)


# ---------------------------------------------------------------- atoms


def _translate_frames(frame: Moebius, reach: float, rep: FuchsianRep) -> tuple[Moebius, ...]:
    """Deck translates ``g @ frame`` whose image of 0 lies within ``R + reach`` of 0."""
    c = frame(0.0)
    dc = 2.0 * math.atanh(abs(c))
    out = []
    for _, g in rep.shell(dc + OCTAGON_CIRCUMRADIUS + reach):
        if 2.0 * math.atanh(abs(g(c))) <= OCTAGON_CIRCUMRADIUS + reach + 1e-9:
            out.append(g @ frame)
    return tuple(out)


def _recentre(frame: Moebius, rep: FuchsianRep) -> Moebius:
    _, w = rep.dirichlet_reduce(frame(0.0))
    return rep.rep_matrix(w) @ frame


@dataclass(frozen=True)
class BallAtom:
    """``theta = phi(d(c, z)) <omega, dz> u`` on a hyperbolic ball, repeated over deck translates.

    ``covector`` is given in disk coordinates at the centre; at the centre
    ``theta(v) = <covector, v> value``.
    """

    center: complex
    radius: float
    covector: tuple[float, float]
    value: tuple[float, ...]

    kind = "ball"

    @functools.cached_property
    def frame(self) -> Moebius:
        return Moebius.translation(self.center)

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def reach(self) -> float:
        return self.radius

    def frames(self, rep: FuchsianRep) -> tuple[Moebius, ...]:
        return _translate_frames(_recentre(self.frame, rep), self.reach, rep)

    def scaled(self, lam: float) -> BallAtom:
        return BallAtom(self.center, self.radius, self.covector, tuple(lam * x for x in self.value))

    def local_coefficient(self, w, dw):
        """Scalar coefficient of ``value`` at frame-local points ``w``."""
        r = 2.0 * np.arctanh(np.minimum(np.abs(w), 1.0 - 1e-16))
        # covector given at the centre; frame derivative there is 1/(1 - |c|^2)
        k = 1.0 - abs(self.center) ** 2
        ox, oy = self.covector
        return bump(r, self.radius) * k * (ox * dw.real + oy * dw.imag)

    def local_support(self, w, margin: float = 0.0):
        return 2.0 * np.arctanh(np.minimum(np.abs(w), 1.0 - 1e-16)) < self.radius + margin

    def sample_support(self, n: int) -> np.ndarray:
        """``n x n`` polar grid of the support, as frame-local points."""
        r = (np.arange(n) + 0.5) / n * self.radius
        a = np.arange(n) / n * 2.0 * math.pi
        rr, aa = np.meshgrid(np.tanh(0.5 * r), a, indexing="ij")
        return (rr * np.exp(1j * aa)).ravel()

    def to_record(self) -> dict:
        return {
            "kind": "ball",
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "covector": list(self.covector),
            "value": list(self.value),
        }


@dataclass(frozen=True)
class TubeAtom:
    """Tube about a geodesic window; holonomy along its central arc is exactly ``exp(value)``.

    ``frame`` maps the real diameter onto the central geodesic with the window
    centred at 0, so the window is ``|s| <= length / 2`` in Fermi coordinates.
    """

    frame: Moebius
    length: float
    radius: float
    value: tuple[float, ...]
    anchor: str = ""
    window_start: float = 0.0

    kind = "tube"

    @property
    def scale(self) -> float:
        return min(self.radius, self.length)

    @property
    def reach(self) -> float:
        return 0.5 * self.length + self.radius

    def frames(self, rep: FuchsianRep) -> tuple[Moebius, ...]:
        return _translate_frames(_recentre(self.frame, rep), self.reach, rep)

    def scaled(self, lam: float) -> TubeAtom:
        return TubeAtom(
            self.frame, self.length, self.radius, tuple(lam * x for x in self.value), self.anchor, self.window_start
        )

    def local_coefficient(self, w, dw):
        s, r = fermi(w)
        sigma = (s + 0.5 * self.length) / self.length
        inside = (np.abs(r) < self.radius) & (sigma > 0.0) & (sigma < 1.0)
        prof = np.where(inside, bump(r, self.radius) * smoothstep_derivative(sigma), 0.0)
        return -prof * fermi_ds(w, dw) / self.length

    def local_support(self, w, margin: float = 0.0):
        s, r = fermi(w)
        return (np.abs(r) < self.radius + margin) & (np.abs(s) < 0.5 * self.length + margin)

    def sample_support(self, n: int) -> np.ndarray:
        s = ((np.arange(n) + 0.5) / n - 0.5) * self.length
        r = ((np.arange(n) + 0.5) / n - 0.5) * 2.0 * self.radius
        ss, rr = np.meshgrid(s, r, indexing="ij")
        return _fermi_point(ss, rr).ravel()

    def to_record(self) -> dict:
        return {
            "kind": "tube",
            "frame": [self.frame.a.real, self.frame.a.imag, self.frame.b.real, self.frame.b.imag],
            "length": self.length,
            "radius": self.radius,
            "value": list(self.value),
            "anchor": self.anchor,
            "window_start": self.window_start,
        }


def _fermi_point(s, r):
    """Disk point with Fermi coordinates ``(s, r)`` about the real diameter."""
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    # hyperboloid point (cosh r cosh s, cosh r sinh s, sinh r)
    x0 = np.cosh(r) * np.cosh(s)
    return (np.cosh(r) * np.sinh(s) + 1j * np.sinh(r)) / (1.0 + x0)


Atom = BallAtom | TubeAtom


def atom_from_record(rec: dict) -> Atom:
    if rec["kind"] == "ball":
        return BallAtom(complex(*rec["center"]), rec["radius"], tuple(rec["covector"]), tuple(rec["value"]))
    if rec["kind"] == "tube":
        a_re, a_im, b_re, b_im = rec["frame"]
        return TubeAtom(
            Moebius(complex(a_re, a_im), complex(b_re, b_im)),
            rec["length"],
            rec["radius"],
            tuple(rec["value"]),
            rec.get("anchor", ""),
            rec.get("window_start", 0.0),
        )
    raise ValueError(f"unknown atom kind {rec['kind']!r}")


# ---------------------------------------------------------------- forms


@dataclass(frozen=True)
class ConnectionForm:
    target: Target
    atoms: tuple[Atom, ...] = ()
    rep: FuchsianRep = field(default_factory=octagon_rep, compare=False, repr=False)

    def __post_init__(self):
        for atom in self.atoms:
            if len(atom.value) != self.target.dim:
                raise ValueError(f"atom value has {len(atom.value)} coordinates, target {self.target.name} needs {self.target.dim}")

    @property
    def is_empty(self) -> bool:
        return all(not any(a.value) for a in self.atoms)

    def with_atom(self, atom: Atom) -> ConnectionForm:
        return ConnectionForm(self.target, self.atoms + (atom,), self.rep)

    def without_tubes(self) -> ConnectionForm:
        return ConnectionForm(self.target, tuple(a for a in self.atoms if a.kind != "tube"), self.rep)

    def scaled(self, lam: float) -> ConnectionForm:
        return ConnectionForm(self.target, tuple(a.scaled(lam) for a in self.atoms), self.rep)

    @functools.cached_property
    def _frames(self) -> tuple[tuple[tuple[Moebius, ...], ...], ...]:
        return tuple(tuple(f.inverse() for f in atom.frames(self.rep)) for atom in self.atoms)

    @functools.cached_property
    def min_scale(self) -> float:
        return min((a.scale for a in self.atoms), default=math.inf)

    def evaluate_reduced(self, z, v) -> np.ndarray:
        """Values at points already in the fundamental octagon."""
        out = np.zeros((z.size, self.target.dim))
        for atom, inv_frames in zip(self.atoms, self._frames):
            if not any(atom.value):
                continue
            coef = np.zeros(z.size)
            for finv in inv_frames:
                w = finv(z)
                near = np.abs(w) < math.tanh(0.5 * atom.reach) + 1e-12
                if not near.any():
                    continue
                wn = w[near]
                dw = finv.derivative(z[near]) * v[near]
                coef[near] += atom.local_coefficient(wn, dw)
            out += coef[:, None] * np.asarray(atom.value)[None, :]
        return out

    def evaluate_many(self, z, v) -> np.ndarray:
        """``theta_z(v)`` for arrays of disk points and complex tangent vectors; shape ``(n, dim)``."""
        z = np.array(z, dtype=complex, ndmin=1)
        v = np.broadcast_to(np.asarray(v, dtype=complex), z.shape)
        if not self.atoms:
            return np.zeros((z.size, self.target.dim))
        zr, a, b = self.rep.reduce_points(z)
        vr = v / (b.conj() * z + a.conj()) ** 2
        return self.evaluate_reduced(zr, vr)

    def in_support(self, z, margin: float = 0.0) -> np.ndarray:
        z = np.array(z, dtype=complex, ndmin=1)
        zr, _, _ = self.rep.reduce_points(z)
        hit = np.zeros(z.size, dtype=bool)
        for atom, inv_frames in zip(self.atoms, self._frames):
            for finv in inv_frames:
                hit |= atom.local_support(finv(zr), margin)
        return hit

    def support_samples(self, n: int = 20) -> np.ndarray:
        pts = [f(atom.sample_support(n)) for atom in self.atoms for f in (atom.frame,)]
        return np.concatenate(pts) if pts else np.zeros(0, dtype=complex)

    def check_disjoint(self, n: int = 20) -> None:
        """Raise ``PlacementError`` if two atoms (or translates) overlap."""
        for i, atom in enumerate(self.atoms):
            pts = atom.frame(atom.sample_support(n))
            others = ConnectionForm(self.target, self.atoms[:i] + self.atoms[i + 1 :], self.rep)
            if others.atoms and others.in_support(pts).any():
                raise PlacementError(f"atom {i} overlaps another atom")
            if atom.kind == "ball":
                c = atom.center
                for w, g in self.rep.shell(2 * OCTAGON_CIRCUMRADIUS + 2 * atom.radius):
                    if w and dist(c, g(c)) <= 2 * atom.radius:
                        raise PlacementError(f"ball atom {i} overlaps its translate by {w!r}")

    def to_records(self) -> list[dict]:
        return [a.to_record() for a in self.atoms]


def evaluate(form: ConnectionForm, z: complex, tangent) -> np.ndarray:
    """``theta_z(tangent)``; ``tangent`` is a complex number or a real 2-vector."""
    if not isinstance(tangent, complex | float | int):
        tangent = complex(tangent[0], tangent[1])
    return form.evaluate_many(np.array([z]), np.array([complex(tangent)]))[0]


# ---------------------------------------------------------------- holonomy


@dataclass(frozen=True)
class HolonomyResult:
    value: np.ndarray
    est_error: float
    steps: int


def _as_leg(p, rep: FuchsianRep) -> Leg:
    if isinstance(p, Leg):
        return p
    if isinstance(p, GeodesicSegment):
        return Leg.from_segment(p)
    raise TypeError(f"cannot use {type(p).__name__} as a path piece")


def lifted_distance(p: LiftedPoint, q: LiftedPoint, rep: FuchsianRep) -> float:
    n = Moebius.translation(p.local).inverse() @ rep.rep_matrix(reduce(inverse(p.word) + q.word)) @ Moebius.translation(q.local)
    return 2.0 * math.asinh(abs(n.b))


def _active_windows(form: ConnectionForm, leg: Leg) -> list[tuple[float, float, int]]:
    """Sub-intervals of ``[0, length]`` where the form may be nonzero, with a base cell count."""
    h0 = form.min_scale / 16.0
    n = max(1, math.ceil(leg.length / h0))
    grid = np.linspace(0.0, leg.length, n + 1)
    z, v = leg.points_tangents(grid)
    nz = np.any(form.evaluate_many(z, v) != 0.0, axis=1)
    cell = nz[:-1] | nz[1:]
    active = cell.copy()
    active[1:] |= cell[:-1]
    active[:-1] |= cell[1:]
    out = []
    i = 0
    while i < n:
        if active[i]:
            j = i
            while j < n and active[j]:
                j += 1
            out.append((grid[i], grid[j], j - i))
            i = j
        else:
            i += 1
    return out


def _magnus_pass(form: ConnectionForm, leg: Leg, windows, factor: int) -> tuple[np.ndarray, int]:
    target = form.target
    nodes, hs = [], []
    for a, b, cells in windows:
        n = cells * factor
        h = (b - a) / n
        left = a + h * np.arange(n)
        nodes.append(left + h * (0.5 - _SQ3 / 6.0))
        nodes.append(left + h * (0.5 + _SQ3 / 6.0))
        hs.append(np.full(n, h))
    h = np.concatenate(hs)
    n1 = np.concatenate(nodes[0::2])
    n2 = np.concatenate(nodes[1::2])
    z, v = leg.points_tangents(np.concatenate([n1, n2]))
    vals = form.evaluate_many(z, v)
    b1, b2 = vals[: h.size], vals[h.size :]
    # Y' = Y A with A = -B: Omega = h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A1, A2]
    omega = -0.5 * h[:, None] * (b1 + b2)
    if target.dim > 1:
        omega += (_SQ3 / 12.0) * (h * h)[:, None] * target.bracket_many(b1, b2)
    omega = omega[np.any(omega != 0.0, axis=1)]
    return target.exp_product(omega), h.size


def leg_holonomy(form: ConnectionForm, leg: Leg, tol: float = 1e-9, max_steps: int = MAX_STEPS) -> HolonomyResult:
    target = form.target
    if form.is_empty or leg.length == 0.0:
        return HolonomyResult(target.identity(), 0.0, 0)
    windows = _active_windows(form, leg)
    if not windows:
        return HolonomyResult(target.identity(), 0.0, 0)
    prev, steps = _magnus_pass(form, leg, windows, 1)
    factor = 2
    while True:
        cur, steps = _magnus_pass(form, leg, windows, factor)
        err = target.matrix_error(prev, cur)
        if err <= tol:
            return HolonomyResult(cur, err, steps)
        if 2 * steps > max_steps:
            raise IntegrationError(f"holonomy along {leg!r} did not reach tol {tol} (error {err:.3g}, {steps} steps)")
        prev = cur
        factor *= 2


def holonomy(form: ConnectionForm, path, tol: float = 1e-9) -> HolonomyResult:
    """Holonomy along a leg, geodesic segment or contiguous list of them."""
    pieces = [path] if isinstance(path, Leg | GeodesicSegment) else list(path)
    legs = [_as_leg(p, form.rep) for p in pieces]
    for l1, l2 in zip(legs, legs[1:]):
        if lifted_distance(l1.end, l2.start, form.rep) > 1e-9:
            raise ValueError("path pieces are not contiguous")
    target = form.target
    y, err, steps = target.identity(), 0.0, 0
    for leg in legs:
        r = leg_holonomy(form, leg, tol)
        y = target.mul(y, r.value)
        err += r.est_error
        steps += r.steps
    return HolonomyResult(y, err, steps)


# ---------------------------------------------------------------- curvature


def curvature_samples(form: ConnectionForm, z, h: float = 1e-5) -> np.ndarray:
    """Algebra norm of ``d theta + [theta(e1), theta(e2)]`` per unit hyperbolic area at points ``z``."""
    z = np.asarray(z, dtype=complex)
    ones = np.ones_like(z)
    tx = lambda p: form.evaluate_many(p, ones)  # noqa: E731
    ty = lambda p: form.evaluate_many(p, 1j * ones)  # noqa: E731
    d_theta = (ty(z + h) - ty(z - h)) / (2 * h) - (tx(z + 1j * h) - tx(z - 1j * h)) / (2 * h)
    ax, ay = tx(z), ty(z)
    if form.target.dim > 1:
        d_theta = d_theta + np.array([form.target.bracket(p, q) for p, q in zip(ax, ay)])
    scale = ((1.0 - np.abs(z) ** 2) / 2.0) ** 2
    return np.linalg.norm(d_theta, axis=1) * scale


def curvature_bound(form: ConnectionForm, per_atom: int = 10_000, h: float = 1e-5) -> float:
    """Sup of the hyperbolic curvature norm over a grid of ``per_atom`` points in each support."""
    n = max(1, int(round(math.sqrt(per_atom))))
    best = 0.0
    for atom in form.atoms:
        if not any(atom.value):
            continue
        pts = _recentre(atom.frame, form.rep)(atom.sample_support(n))
        best = max(best, float(curvature_samples(form, pts, h).max()))
    return best


# ---------------------------------------------------------------- random forms


def random_ball_form(
    target: Target,
    rng: np.random.Generator,
    n_atoms: int = 4,
    radius: float = 0.4,
    amplitude: float = 1.0,
) -> ConnectionForm:
    """Ball atoms at random well-separated centres in the octagon."""
    rep = octagon_rep()
    r_max = math.tanh(0.5 * (OCTAGON_CIRCUMRADIUS - 0.2))
    atoms: list[BallAtom] = []
    shell = rep.shell(2 * OCTAGON_CIRCUMRADIUS + 2 * radius)
    for _ in range(10_000):
        if len(atoms) == n_atoms:
            break
        c = complex(*rng.uniform(-r_max, r_max, 2))
        if abs(c) >= r_max or rep.dirichlet_reduce(c)[1]:
            continue
        others = [a.center for a in atoms]
        ok = all(dist(c, g(c)) > 2 * radius + 0.05 for w, g in shell if w)
        ok = ok and all(dist(c, g(o)) > 2 * radius + 0.05 for o in others for _, g in shell)
        if not ok:
            continue
        cov = tuple(float(x) for x in rng.normal(size=2))
        val = tuple(float(x) for x in amplitude * rng.normal(size=target.dim))
        atoms.append(BallAtom(c, radius, cov, val))
    if len(atoms) < n_atoms:
        raise PlacementError(f"placed only {len(atoms)} of {n_atoms} ball atoms")
    return ConnectionForm(target, tuple(atoms), rep)


# ---------------------------------------------------------------- prescribed tubes


def _axis_point(geom, s: float) -> LiftedPoint:
    """Point at arclength ``s`` along the class axis, stored in the nearer lift."""
    tau = geom.translation_length
    if s <= 0.5 * tau:
        return LiftedPoint("", complex(geom.axis.point_at(s)))
    return LiftedPoint(geom.key, complex(geom.axis.point_at(s - tau)))


def path_samples(legs, spacing: float) -> np.ndarray:
    """Local points sampled along legs at about ``spacing``."""
    out = []
    for leg in legs:
        n = max(2, math.ceil(leg.length / spacing) + 1)
        z, _ = leg.points_tangents(np.linspace(0.0, leg.length, n))
        out.append(z)
    return np.concatenate(out) if out else np.zeros(0, dtype=complex)


def class_paths(cls: ConjClassRep) -> list[Leg]:
    """The connector and the free loop of a conjugacy class."""
    return [cls.connector(), cls.geometry.loop()]


def _tube_clear(candidate: TubeAtom, rep: FuchsianRep, avoid_pts: np.ndarray, form: ConnectionForm, margin: float) -> bool:
    probe = ConnectionForm(form.target, (candidate,), rep)
    if avoid_pts.size and probe.in_support(avoid_pts, margin).any():
        return False
    if form.atoms:
        # existing supports, enlarged, must miss the candidate
        pts = candidate.frame(candidate.sample_support(24))
        if form.in_support(pts, margin).any():
            return False
    return True


def place_tube(
    cls: ConjClassRep,
    form: ConnectionForm,
    avoid=(),
    length: float = 0.6,
    radius: float = 0.08,
    margin: float | None = None,
    candidates: int = 64,
) -> TubeAtom:
    """A zero-valued tube on the free loop of ``cls`` clear of ``avoid`` paths and existing atoms."""
    rep = form.rep
    geom = cls.geometry
    tau = geom.translation_length
    margin = radius if margin is None else margin
    if length + 4 * margin >= tau:
        raise PlacementError(f"tube of length {length} does not fit on a loop of length {tau:.4g}")
    spacing = 0.25 * radius
    avoid_legs = [p for p in avoid] + [cls.connector()]
    avoid_pts = path_samples(avoid_legs, spacing)
    loop = geom.loop()
    for k in range(candidates):
        s0 = 2 * margin + (tau - length - 4 * margin) * (k + 0.5) / candidates
        frame = geom.axis.frame @ Moebius.real_translation(s0 + 0.5 * length)
        cand = TubeAtom(frame, length, radius, (0.0,) * form.target.dim, geom.key, s0)
        # rest of the loop; points within 2 margins of the window ends are on the window's own line
        rest = np.linspace(s0 + length + 2 * margin, s0 + tau - 2 * margin, max(2, math.ceil(tau / spacing)))
        rest_pts, _ = loop.points_tangents(np.mod(rest, tau))
        pts = np.concatenate([avoid_pts, rest_pts])
        if _tube_clear(cand, rep, pts, form, margin):
            return cand
    raise PlacementError(f"no admissible tube window on the loop of class {geom.key!r}")


def prescribed_tube(
    cls: ConjClassRep,
    form: ConnectionForm,
    target_value,
    avoid=(),
    tol: float = 1e-11,
    length: float = 0.6,
    radius: float = 0.08,
    check: float = 1e-6,
) -> TubeAtom:
    """Tube on the loop of ``cls`` making its homogeneous value equal ``target_value``.

    With ``S`` the connector holonomy and ``h`` the loop holonomy, the value
    of the class element is ``S h^(sign n) S^-1``.  The tube contributes
    ``exp(X)`` between the two loop arcs, so ``X`` is chosen to make
    ``Hol(arc1) exp(X) Hol(arc2)`` the required ``h``.
    """
    tg = form.target
    for shrink in (1.0, 0.5, 0.25):
        try:
            cand = place_tube(cls, form, avoid, length * shrink, radius * shrink)
            break
        except PlacementError:
            if shrink == 0.25:
                raise
    length, radius = cand.length, cand.radius
    geom = cls.geometry
    s_conn = holonomy(form, cls.connector(), tol).value
    need = tg.mul(tg.mul(tg.inv(s_conn), target_value), s_conn)
    m = cls.sign * cls.exponent
    h_req = tg.exp(tg.log(need) / m) if m != 1 else need
    x_bar = LiftedPoint("", geom.marked_point)
    arc1 = Leg(x_bar, _axis_point(geom, cand.window_start))
    arc2 = Leg(_axis_point(geom, cand.window_start + length), LiftedPoint(geom.key, geom.marked_point))
    h1 = holonomy(form, arc1, tol).value
    h2 = holonomy(form, arc2, tol).value
    t = tg.mul(tg.mul(tg.inv(h1), h_req), tg.inv(h2))
    x = tg.log(t)
    if not np.all(np.isfinite(x)):
        raise ConstructionError("tube holonomy is not in the image of exp")
    atom = TubeAtom(cand.frame, length, radius, tuple(float(c) for c in x), geom.key, cand.window_start)
    if check is not None:
        new = form.with_atom(atom)
        s = holonomy(new, cls.connector(), tol).value
        h = holonomy(new, geom.loop(), tol).value
        val = tg.conjugate(s, tg.power(h, m))
        res = tg.distance(val, target_value)
        if res > check:
            raise ConstructionError(f"prescribed value missed by {res:.3g} on class {geom.key!r}")
    return atom


# ---------------------------------------------------------------- abelian quadrature oracles


def _require_abelian(form: ConnectionForm) -> None:
    if not isinstance(form.target, Abelian):
        raise TypeError("quadrature oracles are scalar; use an abelian target")


def line_integral(form: ConnectionForm, leg, epsabs: float = 1e-13) -> np.ndarray:
    """``-int theta`` along a leg by adaptive scalar quadrature (abelian targets)."""
    _require_abelian(form)
    leg = _as_leg(leg, form.rep)
    dim = form.target.dim
    if leg.length == 0.0 or not form.atoms:
        return np.zeros(dim)
    piece = form.min_scale / 4.0
    edges = np.linspace(0.0, leg.length, max(2, math.ceil(leg.length / piece) + 1))
    # skip pieces where a sample every min_scale/256 sees nothing; a support
    # slipping between samples penetrates < 1e-5 of its radius, where the
    # cubic bump is below 1e-15
    sub = np.linspace(edges[:-1], edges[1:], 65, axis=1)
    z, v = leg.points_tangents(sub.ravel())
    hit = np.any(form.evaluate_many(z, v) != 0.0, axis=1).reshape(sub.shape).any(axis=1)
    live = hit.copy()
    live[1:] |= hit[:-1]
    live[:-1] |= hit[1:]

    def f(s, k):
        z, v = leg.points_tangents(np.array([s]))
        return form.evaluate_many(z, v)[0, k]

    out = np.zeros(dim)
    for k in range(dim):
        for a, b in zip(edges[:-1][live], edges[1:][live]):
            out[k] -= integrate.quad(f, a, b, args=(k,), epsabs=epsabs, epsrel=1e-12, limit=200)[0]
    return out


def _half_plane(p: complex, q: complex, inside: complex) -> tuple[float, complex, float]:
    """``(A, b, sign)`` with the geodesic through ``p, q`` given by ``A(|w|^2 + 1) = 2 Re(w conj b)``."""
    rp = np.array([abs(p) ** 2 + 1.0, -2.0 * p.real, -2.0 * p.imag])
    rq = np.array([abs(q) ** 2 + 1.0, -2.0 * q.real, -2.0 * q.imag])
    a, bx, by = np.cross(rp, rq)
    b = complex(bx, by)
    val = a * (abs(inside) ** 2 + 1.0) - 2.0 * (inside * b.conjugate()).real
    return float(a), b, math.copysign(1.0, val)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _circle_angles(a: float, b: complex, rhs: float) -> list[float]:
    """Angles ``phi`` with ``Re(e^{i phi} conj b) = rhs``."""
    if abs(b) == 0.0 or abs(rhs) > abs(b):
        return []
    base, half = cmath.phase(b), math.acos(rhs / abs(b))
    return [base - half, base + half]


def _ball_triangle_integral(atom: BallAtom, frame_inv: Moebius, vertices, epsabs: float) -> float:
    """``int_T d(theta)`` for one translate, in the atom's local coordinates (polar quadrature).

    The angular range is split where the region ``{t < rmax} & T`` changes
    combinatorics (vertex directions, side crossings of the support circle,
    tangencies), so each piece is smooth apart from square-root endpoints.
    """
    w = [complex(frame_inv(v)) for v in vertices]
    sides = [_half_plane(w[i], w[(i + 1) % 3], w[(i + 2) % 3]) for i in range(3)]
    rmax = math.tanh(0.5 * atom.radius)

    def inside(p: complex) -> bool:
        return all(sg * (a * (abs(p) ** 2 + 1.0) - 2.0 * (p * b.conjugate()).real) > 0 for a, b, sg in sides)

    breaks = [cmath.phase(p) for p in w if abs(p) < rmax]
    for a, b, _ in sides:
        breaks += _circle_angles(a, b, a * (rmax * rmax + 1.0) / (2.0 * rmax))
        breaks += _circle_angles(a, b, a) + _circle_angles(a, b, -a)
    if not breaks:
        # the support circle misses the boundary of T; d(theta) integrates to 0 over the whole ball
        return 0.0
    k = 1.0 - abs(atom.center) ** 2
    ox, oy = atom.covector
    rho = atom.radius

    def radial(t):
        # d/dt of bump(2 atanh t), times t (polar area element)
        r = 2.0 * np.arctanh(t)
        u = 1.0 - (r / rho) ** 2
        return 3.0 * u * u * (-2.0 * r / rho**2) * 2.0 / (1.0 - t * t) * t

    def inner(phi):
        e = cmath.exp(1j * phi)
        cuts = [0.0, rmax]
        for a, b, _ in sides:
            # a (t^2 + 1) - 2 t Re(e conj b) = 0
            c = (e * b.conjugate()).real
            if a == 0.0:
                continue
            disc = c * c - a * a
            if disc > 0.0:
                for t in ((c - math.sqrt(disc)) / a, (c + math.sqrt(disc)) / a):
                    if 0.0 < t < rmax:
                        cuts.append(t)
        cuts.sort()
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo <= 0.0 or not inside(0.5 * (lo + hi) * e):
                continue
            t = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
            total += 0.5 * (hi - lo) * float(np.dot(_GL_W, radial(t)))
        return k * (math.cos(phi) * oy - math.sin(phi) * ox) * total

    nodes = sorted({(x % (2.0 * math.pi)) for x in breaks} | {0.0, 2.0 * math.pi})
    total = 0.0
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        if hi - lo > 1e-15:
            total += integrate.quad(inner, lo, hi, epsabs=epsabs, epsrel=1e-12, limit=100)[0]
    return total


# every point of a geodesic triangle is this close to one of its other two sides
_THIN = math.log(1.0 + math.sqrt(2.0))


def _translates_meeting(form: ConnectionForm, atom: BallAtom, vertices, spacing: float = 0.25) -> list[Moebius]:
    """Frames of the translates of ``atom`` whose ball can meet the triangle."""
    rep = form.rep
    base = _recentre(atom.frame, rep)
    c0 = base(0.0)
    near = _THIN + spacing + atom.radius
    pts = []
    for i in range(3):
        seg = GeodesicSegment(vertices[i], vertices[(i + 1) % 3])
        n = max(2, math.ceil(seg.length / spacing) + 1)
        pts.extend(seg.point_at(np.linspace(0.0, seg.length, n)))
    local = rep.shell(2.0 * OCTAGON_CIRCUMRADIUS + near)
    shell_centres = np.array([complex(g(c0)) for _, g in local])
    found: list[Moebius] = []
    centres: list[complex] = []
    for p in pts:
        p_red, w = rep.dirichlet_reduce(complex(p))
        back = rep.rep_matrix(inverse(w))
        for i in np.flatnonzero(dist(shell_centres, p_red) <= near):
            f = back @ local[i][1] @ base
            c = f(0.0)
            if all(dist(c, o) > 1e-6 for o in centres):
                centres.append(c)
                found.append(f)
    return found


def stokes_integral(form: ConnectionForm, vertices, epsabs: float = 1e-12) -> np.ndarray:
    """``int_T d(theta)`` over the geodesic triangle with the given disk vertices (abelian, ball atoms).

    The triangle is taken with the standard orientation of the disk.  Each
    atom translate meeting the triangle is integrated in polar coordinates
    about its own centre, so the result does not use the holonomy integrator.
    """
    _require_abelian(form)
    if any(a.kind != "ball" for a in form.atoms):
        raise NotImplementedError("the Stokes oracle handles ball atoms only")
    vertices = [check_point(v) for v in vertices]
    out = np.zeros(form.target.dim)
    for atom in form.atoms:
        if not any(atom.value):
            continue
        for f in _translates_meeting(form, atom, vertices):
            out += _ball_triangle_integral(atom, f.inverse(), vertices, epsabs) * np.asarray(atom.value)
    return out
