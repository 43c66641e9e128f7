"""Poincare disk geometry in curvature -1.

Points are Python complex numbers (or complex ndarrays) in the open unit
disk.  Isometries are unit-determinant matrices ``[[a, b], [conj(b), conj(a)]]``
acting by ``z -> (a z + b) / (conj(b) z + conj(a))``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

CLASSIFY_TOL = 1e-9


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


def check_point(z: complex) -> complex:
    z = complex(z)
    if not abs(z) < 1.0:
        raise DomainError(f"point {z!r} is not in the open unit disk")
    return z


def dist(p, q):
    """Hyperbolic distance; vectorizes over numpy arrays."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    ap, aq = np.abs(p), np.abs(q)
    if np.any(ap >= 1.0) or np.any(aq >= 1.0):
        raise DomainError("point on or outside the unit circle")
    # sinh(d/2) = |p - q| / sqrt((1 - |p|^2)(1 - |q|^2)) is stable near p = q
    d = 2.0 * np.arcsinh(np.abs(p - q) / np.sqrt((1.0 - ap * ap) * (1.0 - aq * aq)))
    return float(d) if d.ndim == 0 else d


def dist_from_origin(z):
    return 2.0 * np.arctanh(np.abs(z))


@dataclass(frozen=True)
class Moebius:
    """Orientation-preserving disk isometry ``[[a, b], [conj b, conj a]]``."""

    a: complex
    b: complex

    @classmethod
    def identity(cls) -> Moebius:
        return cls(1.0 + 0j, 0j)

    @classmethod
    def rotation(cls, angle: float) -> Moebius:
        """Rotation about 0 by ``angle``."""
        return cls(cmath.exp(0.5j * angle), 0j)

    @classmethod
    def translation(cls, p: complex) -> Moebius:
        """The transvection along the diameter through ``p`` taking 0 to ``p``."""
        p = check_point(p)
        s = 1.0 / math.sqrt(1.0 - abs(p) ** 2)
        return cls(complex(s), p * s)

    @classmethod
    def real_translation(cls, length: float) -> Moebius:
        """Translation by hyperbolic ``length`` along the real diameter towards +1."""
        return cls(complex(math.cosh(0.5 * length)), complex(math.sinh(0.5 * length)))

    @property
    def det(self) -> float:
        return abs(self.a) ** 2 - abs(self.b) ** 2

    @property
    def trace(self) -> float:
        return 2.0 * self.a.real

    def normalized(self) -> Moebius:
        s = math.sqrt(self.det)
        return Moebius(self.a / s, self.b / s)

    def inverse(self) -> Moebius:
        return Moebius(self.a.conjugate(), -self.b)

    def __matmul__(self, other: Moebius) -> Moebius:
        a = self.a * other.a + self.b * other.b.conjugate()
        b = self.a * other.b + self.b * other.a.conjugate()
        # |a|^2 - |b|^2 cancels badly for long products; fix |a| from |b| instead
        return Moebius(a / abs(a) * math.hypot(1.0, abs(b)), b)

    def __call__(self, z):
        a, b = self.a, self.b
        return (a * z + b) / (b.conjugate() * z + a.conjugate())

    def derivative(self, z):
        """Complex derivative; tangent vectors (as complex numbers) are multiplied by it."""
        return 1.0 / (self.b.conjugate() * z + self.a.conjugate()) ** 2

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b.conjugate(), self.a.conjugate()]])

    def distance_to_identity(self) -> float:
        """Frobenius distance of the matrix to the nearer of +I and -I."""
        m = self.matrix()
        eye = np.eye(2)
        return float(min(np.linalg.norm(m - eye), np.linalg.norm(m + eye)))

    def power(self, n: int) -> Moebius:
        out = Moebius.identity()
        base = self if n >= 0 else self.inverse()
        for _ in range(abs(n)):
            out = out @ base
        return out


class IsometryType(Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"


def apply(m: Moebius, p: complex) -> complex:
    return m(check_point(p))


def classify(m: Moebius, tol: float = CLASSIFY_TOL) -> IsometryType:
    t = abs(m.trace)
    if abs(t - 2.0) <= tol:
        # +-I (the trivial rotation) also has trace +-2
        return IsometryType.ELLIPTIC if abs(m.b) <= tol else IsometryType.PARABOLIC
    return IsometryType.HYPERBOLIC if t > 2.0 else IsometryType.ELLIPTIC


def translation_length(m: Moebius) -> float:
    if classify(m) is not IsometryType.HYPERBOLIC:
        raise DomainError("translation length is only defined for hyperbolic isometries")
    return 2.0 * math.acosh(abs(m.a.real))


def fixed_points(m: Moebius) -> tuple[complex, complex]:
    """Boundary fixed points ``(repelling, attracting)`` of a hyperbolic isometry."""
    if classify(m) is not IsometryType.HYPERBOLIC:
        raise DomainError("ideal fixed points need a hyperbolic isometry")
    a, b = m.a, m.b
    if abs(b) < 1e-300:
        raise DomainError("hyperbolic isometry with b = 0 cannot occur")
    # conj(b) z^2 + (conj(a) - a) z - b = 0
    bc = b.conjugate()
    disc = cmath.sqrt((a.conjugate() - a) ** 2 + 4.0 * bc * b)
    roots = [(-(a.conjugate() - a) + sgn * disc) / (2.0 * bc) for sgn in (1.0, -1.0)]
    roots = [r / abs(r) for r in roots]
    # attracting point has |m'(z)| < 1
    if abs(m.derivative(roots[0])) < abs(m.derivative(roots[1])):
        return roots[1], roots[0]
    return roots[0], roots[1]


@dataclass(frozen=True)
class Axis:
    """Directed geodesic line, parametrized by arclength from its foot point nearest 0."""

    repelling: complex
    attracting: complex
    frame: Moebius

    @property
    def foot(self) -> complex:
        return self.frame(0.0)

    def point_at(self, s):
        return self.frame(np.tanh(0.5 * np.asarray(s, dtype=float)))

    def window(self, s0: float, s1: float) -> GeodesicSegment:
        return GeodesicSegment(complex(self.point_at(s0)), complex(self.point_at(s1)))

    def contains(self, z: complex, tol: float = 1e-9) -> bool:
        """Whether ``z`` lies on the line, up to hyperbolic distance ``tol``."""
        w = self.frame.inverse()(z)
        return abs(math.asinh(2.0 * w.imag / (1.0 - abs(w) ** 2))) < tol


def line_through_ideal(rep: complex, att: complex) -> Axis:
    """The directed geodesic from ideal point ``rep`` to ideal point ``att``."""
    # the foot point is well conditioned even when the direction of rep + att
    # is not (nearly antipodal ends); the frame's rotation comes from att
    mid = rep + att
    foot = 0j
    if abs(mid) >= 1e-12:
        half = 0.5 * abs(cmath.phase(att / rep))
        foot = cmath.exp(1j * cmath.phase(mid)) * math.tan(0.25 * math.pi - 0.5 * half)
    t = Moebius.translation(foot)
    frame = t @ Moebius.rotation(cmath.phase(t.inverse()(att)))
    return Axis(rep, att, frame)


def axis(m: Moebius) -> Axis:
    rep, att = fixed_points(m)
    return line_through_ideal(rep, att)


@dataclass(frozen=True)
class GeodesicSegment:
    """Geodesic segment between two disk points, parametrized by arclength."""

    start: complex
    end: complex

    @property
    def length(self) -> float:
        return dist(self.start, self.end)

    @property
    def frame(self) -> Moebius:
        """Isometry taking 0 to ``start`` and the positive real ray onto the segment."""
        t = Moebius.translation(self.start)
        w = t.inverse()(self.end)
        phi = cmath.phase(w) if abs(w) > 0 else 0.0
        return t @ Moebius.rotation(phi)

    def point_at(self, s):
        return self.frame(np.tanh(0.5 * np.asarray(s, dtype=float)))

    def tangent_at(self, s):
        """d/ds of ``point_at``; a complex Euclidean velocity."""
        f = self.frame
        x = np.tanh(0.5 * np.asarray(s, dtype=float))
        return f.derivative(x) * 0.5 * (1.0 - x * x)

    def reversed(self) -> GeodesicSegment:
        return GeodesicSegment(self.end, self.start)


@dataclass(frozen=True)
class GeodesicTriangle:
    v0: complex
    v1: complex
    v2: complex

    def vertices(self) -> tuple[complex, complex, complex]:
        return (self.v0, self.v1, self.v2)

    def angles(self) -> tuple[float, float, float]:
        vs = self.vertices()
        out = []
        for i in range(3):
            v, u, w = vs[i], vs[(i + 1) % 3], vs[(i + 2) % 3]
            t = Moebius.translation(v).inverse()
            tu, tw = t(u), t(w)
            if abs(tu) == 0.0 or abs(tw) == 0.0:
                out.append(float("nan"))
            else:
                out.append(abs(cmath.phase(tu / tw)))
        return tuple(out)

    @property
    def is_degenerate(self) -> bool:
        vs = self.vertices()
        if min(dist(vs[i], vs[(i + 1) % 3]) for i in range(3)) < 1e-12:
            return True
        return abs(sum(self.angles()) - math.pi) < 1e-12


def triangle_area(t: GeodesicTriangle) -> float:
    """Gauss-Bonnet area ``pi - (sum of interior angles)``; 0 for degenerate triangles."""
    for v in t.vertices():
        check_point(v)
    if t.is_degenerate:
        return 0.0
    return min(max(math.pi - sum(t.angles()), 0.0), math.pi)


def triangle_area_by_quadrature(t: GeodesicTriangle, epsabs: float = 1e-11) -> float:
    """Area by adaptive 2D quadrature of ``sinh(rho) d rho d phi`` in polar coordinates at 0.

    The triangle is the signed sum of the three fans spanned by 0 and a side.
    Each fan's angle is parametrized by arclength ``sigma`` along its side,
    which keeps the integrand bounded near far vertices.  Working about the
    origin (rather than moving a vertex there) keeps the thin angular
    sectors seen from a far vertex out of the computation.
    """
    if t.is_degenerate:
        return 0.0
    vs = t.vertices()
    total = 0.0
    for k in range(3):
        side = GeodesicSegment(vs[k], vs[(k + 1) % 3])

        def dphi(sigma, side=side):
            z = complex(side.point_at(sigma))
            if abs(z) < 1e-150:
                return 0.0
            dz = complex(side.tangent_at(sigma))
            return (z.conjugate() * dz).imag / abs(z) ** 2

        part, _ = integrate.nquad(
            lambda rho, sigma, dphi=dphi: math.sinh(rho) * dphi(sigma),
            [
                lambda sigma, side=side: (0.0, dist_from_origin(complex(side.point_at(sigma)))),
                (0.0, side.length),
            ],
            opts={"epsabs": epsabs, "epsrel": 1e-12, "limit": 200},
        )
        total += part
    return abs(total)
