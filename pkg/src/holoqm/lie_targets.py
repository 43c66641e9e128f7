"""Target Lie groups: abelian R^n, SU(2) and the real Heisenberg group.

Group elements are plain numpy arrays; a ``Target`` instance knows how to
multiply, invert, exponentiate and measure them.  Algebra elements are real
coordinate vectors in a fixed basis:

* ``R^n``: additive group, ``exp`` is the identity map on coordinates.
* ``su(2)``: basis ``i sigma_k / 2``; bracket ``[u, v] = -(u x v)``.
* ``heis3``: basis ``X, Y, Z`` with ``[X, Y] = Z``.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# sup of the left-invariant gauge distance from a point to its lattice rounding
HEISENBERG_COVERING_RADIUS = math.sqrt(5.0 / 8.0)


class TargetMismatch(TypeError):
    pass


class Target:
    name: str
    dim: int
    is_step2: bool = False

    def identity(self) -> np.ndarray:
        raise NotImplementedError

    def exp(self, u) -> np.ndarray:
        raise NotImplementedError

    def log(self, g) -> np.ndarray:
        raise NotImplementedError

    def mul(self, g, h) -> np.ndarray:
        raise NotImplementedError

    def inv(self, g) -> np.ndarray:
        raise NotImplementedError

    def bracket(self, u, v) -> np.ndarray:
        raise NotImplementedError

    def distance(self, g, h) -> float:
        raise NotImplementedError

    def bracket_many(self, u, v) -> np.ndarray:
        """Row-wise brackets of two ``(n, dim)`` arrays."""
        return np.array([self.bracket(a, b) for a, b in zip(u, v)]).reshape(np.shape(u))

    def exp_product(self, omegas) -> np.ndarray:
        """``exp(omega_0) exp(omega_1) ...`` in order."""
        y = self.identity()
        for om in omegas:
            y = self.mul(y, self.exp(om))
        return y

    def is_central(self, g, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def project(self, g) -> np.ndarray:
        return g

    def power(self, g, n: int) -> np.ndarray:
        if n < 0:
            g, n = self.inv(g), -n
        out = self.identity()
        while n:
            if n & 1:
                out = self.mul(out, g)
            g = self.mul(g, g)
            n >>= 1
        return out

    def conjugate(self, s, g) -> np.ndarray:
        """``s g s^-1``."""
        return self.mul(self.mul(s, g), self.inv(s))

    def distance_bound_from_algebra(self, a: float) -> float:
        """Upper bound on ``d(1, exp(u))`` given ``|u| <= a``."""
        return a

    def matrix_error(self, g, h) -> float:
        """Entrywise discrepancy used for integration error control."""
        return float(np.max(np.abs(np.asarray(g) - np.asarray(h))))

    def check(self, g) -> np.ndarray:
        return np.asarray(g)

    def to_record(self, g) -> dict:
        arr = np.asarray(g)
        entries = [[float(x.real), float(x.imag)] if np.iscomplexobj(arr) else float(x) for x in arr.ravel()]
        return {"target": self.name, "entries": entries}

    def from_record(self, rec: dict) -> np.ndarray:
        if rec["target"] != self.name:
            raise TargetMismatch(f"record for {rec['target']!r}, expected {self.name!r}")
        return self._from_entries(rec["entries"])

    def _from_entries(self, entries) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other) and self.name == other.name

    def __hash__(self):
        return hash(self.name)


class Abelian(Target):
    """The additive group R^n; holonomy ``exp(-int theta)`` is recorded as ``-int theta``."""

    is_step2 = True

    def __init__(self, n: int = 1):
        self.dim = n
        self.name = "abelian" if n == 1 else f"abelian{n}"

    def identity(self):
        return np.zeros(self.dim)

    def exp(self, u):
        return np.array(u, dtype=float).reshape(self.dim)

    def log(self, g):
        return np.array(g, dtype=float)

    def mul(self, g, h):
        return np.asarray(g) + np.asarray(h)

    def inv(self, g):
        return -np.asarray(g)

    def bracket(self, u, v):
        return np.zeros(self.dim)

    def bracket_many(self, u, v):
        return np.zeros(np.shape(u))

    def exp_product(self, omegas):
        return np.sum(np.asarray(omegas, dtype=float).reshape(-1, self.dim), axis=0)

    def power(self, g, n):
        return n * np.asarray(g)

    def conjugate(self, s, g):
        return np.asarray(g)

    def distance(self, g, h):
        return float(np.linalg.norm(np.asarray(g) - np.asarray(h)))

    def is_central(self, g, tol=1e-9):
        return True

    def _from_entries(self, entries):
        return np.array(entries, dtype=float)

    def __repr__(self):
        return f"Abelian({self.dim})"


class SU2(Target):
    """SU(2) with the bi-invariant metric of diameter 1/2 (quaternion angle / 2 pi)."""

    name = "su2"
    dim = 3
    scale = 1.0 / (2.0 * math.pi)

    def identity(self):
        return np.eye(2, dtype=complex)

    def hat(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5j * np.tensordot(u, SIGMA, axes=(0, 0))

    def exp(self, u):
        u = np.asarray(u, dtype=float)
        theta = float(np.linalg.norm(u))
        if theta == 0.0:
            return self.identity()
        n = u / theta
        return math.cos(0.5 * theta) * np.eye(2) + 1j * math.sin(0.5 * theta) * np.tensordot(n, SIGMA, axes=(0, 0))

    @staticmethod
    def quaternion(g) -> np.ndarray:
        """``(w, x, y, z)`` with ``g = w I + i (x s1 + y s2 + z s3)``."""
        g = np.asarray(g)
        alpha, beta = 0.5 * (g[0, 0] + g[1, 1].conjugate()), 0.5 * (g[1, 0] - g[0, 1].conjugate())
        return np.array([alpha.real, beta.imag, -beta.real, alpha.imag])

    def log(self, g):
        q = self.quaternion(g)
        s = float(np.linalg.norm(q[1:]))
        if s == 0.0:
            return np.zeros(3)
        half = math.atan2(s, q[0])
        return (2.0 * half / s) * q[1:]

    def mul(self, g, h):
        return self.project(np.asarray(g) @ np.asarray(h))

    def inv(self, g):
        return np.asarray(g).conj().T

    def bracket(self, u, v):
        return -np.cross(u, v)

    def bracket_many(self, u, v):
        return -np.cross(u, v, axis=-1)

    def exp_product(self, omegas):
        omegas = np.asarray(omegas, dtype=float).reshape(-1, 3)
        theta = np.linalg.norm(omegas, axis=1)
        c = np.cos(0.5 * theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(theta > 0, np.sin(0.5 * theta) / theta, 0.5)
        vs = (omegas * f[:, None]).tolist()
        w, x, y, z = 1.0, 0.0, 0.0, 0.0
        # quaternion products: (w1, v1)(w2, v2) = (w1 w2 - v1.v2, w1 v2 + w2 v1 - v1 x v2)
        for w2, (x2, y2, z2) in zip(c.tolist(), vs):
            w, x, y, z = (
                w * w2 - x * x2 - y * y2 - z * z2,
                w * x2 + w2 * x - (y * z2 - z * y2),
                w * y2 + w2 * y - (z * x2 - x * z2),
                w * z2 + w2 * z - (x * y2 - y * x2),
            )
        return self.project(np.array([[w + 1j * z, 1j * x + y], [1j * x - y, w - 1j * z]]))

    def project(self, g):
        q = self.quaternion(g)
        w, x, y, z = q / np.linalg.norm(q)
        return np.array([[w + 1j * z, 1j * x + y], [1j * x - y, w - 1j * z]])

    def angle(self, g) -> float:
        """Half rotation angle in ``[0, pi]``; equals ``arccos(Re tr g / 2)``."""
        q = self.quaternion(g)
        return math.atan2(float(np.linalg.norm(q[1:])), q[0])

    def distance(self, g, h):
        return self.angle(self.inv(g) @ np.asarray(h)) * self.scale

    def is_central(self, g, tol=1e-9):
        return min(self.distance(g, self.identity()), self.distance(g, -self.identity())) < tol

    def distance_bound_from_algebra(self, a):
        return min(a / (4.0 * math.pi), 0.5)

    def _from_entries(self, entries):
        return np.array([complex(re, im) for re, im in entries]).reshape(2, 2)


class Heisenberg(Target):
    """Upper unitriangular real 3x3 matrices; entries ``x = g[0,1]``, ``y = g[1,2]``, ``z = g[0,2]``."""

    name = "heis3"
    dim = 3
    is_step2 = True

    @staticmethod
    def element(x: float, y: float, z: float) -> np.ndarray:
        return np.array([[1.0, x, z], [0.0, 1.0, y], [0.0, 0.0, 1.0]])

    @staticmethod
    def entries(g) -> tuple[float, float, float]:
        return g[0, 1], g[1, 2], g[0, 2]

    def identity(self):
        return np.eye(3)

    def exp(self, u):
        x, y, z = (float(c) for c in u)
        return self.element(x, y, z + 0.5 * x * y)

    def log(self, g):
        x, y, z = self.entries(g)
        return np.array([x, y, z - 0.5 * x * y])

    def mul(self, g, h):
        x1, y1, z1 = self.entries(g)
        x2, y2, z2 = self.entries(h)
        return self.element(x1 + x2, y1 + y2, z1 + z2 + x1 * y2)

    def inv(self, g):
        x, y, z = self.entries(g)
        return self.element(-x, -y, x * y - z)

    def power(self, g, n):
        x, y, z = self.entries(g)
        return self.element(n * x, n * y, n * z + 0.5 * n * (n - 1) * x * y)

    def conjugate(self, s, g):
        # the abelianization entries are conjugation invariant; keep them exact
        s1, s2, _ = self.entries(s)
        x, y, z = self.entries(g)
        return self.element(x, y, z + s1 * y - x * s2)

    def bracket(self, u, v):
        return np.array([0.0, 0.0, u[0] * v[1] - u[1] * v[0]])

    def bracket_many(self, u, v):
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        out = np.zeros(u.shape)
        out[:, 2] = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        return out

    def exp_product(self, omegas):
        om = np.asarray(omegas, dtype=float).reshape(-1, 3)
        if om.shape[0] == 0:
            return self.identity()
        x, y = om[:, 0], om[:, 1]
        z = om[:, 2] + 0.5 * x * y
        # corner of a product of unitriangular factors: sum z_i + sum_{i<j} x_i y_j
        xs = np.concatenate([[0.0], np.cumsum(x)[:-1]])
        return self.element(float(x.sum()), float(y.sum()), float(z.sum() + np.dot(xs, y)))

    def gauge(self, u) -> float:
        x, y, z = u
        return max(abs(x), abs(y), math.sqrt(abs(z)))

    def distance(self, g, h):
        return self.gauge(self.log(self.mul(self.inv(g), h)))

    def is_central(self, g, tol=1e-9):
        return float(np.linalg.norm(central_projection(g))) < tol

    def distance_bound_from_algebra(self, a):
        return max(a, math.sqrt(a))

    def check(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape != (3, 3) or np.any(np.diag(g) != 1.0) or np.any(np.tril(g, -1) != 0.0):
            raise ValueError("not an upper unitriangular matrix")
        return g

    def _from_entries(self, entries):
        return self.check(np.array(entries, dtype=float).reshape(3, 3))


def bch2(target: Target, u, v) -> np.ndarray:
    """``log(exp u exp v)`` for step-2 nilpotent (or abelian) algebras."""
    if not target.is_step2:
        raise TypeError(f"bch2 is exact only for step-2 targets, not {target.name}")
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return u + v + 0.5 * target.bracket(u, v)


def central_projection(g) -> np.ndarray:
    """Image in the abelianization R^2 of the Heisenberg group."""
    return np.array([g[0, 1], g[1, 2]])


def lattice_round(g) -> np.ndarray:
    """A nearest point of the integer Heisenberg lattice in the left-invariant gauge.

    ``x`` and ``y`` are rounded half-to-even; the corner entry is then chosen
    so that the central entry of ``g^-1 r`` is as small as possible, which
    keeps ``d(g, r) <= HEISENBERG_COVERING_RADIUS``.
    """
    x, y, z = Heisenberg.entries(np.asarray(g, dtype=float))
    rx, ry = float(np.round(x)), float(np.round(y))
    rz = float(np.round(z + x * (ry - y)))
    return Heisenberg.element(rx, ry, rz)


def is_lattice_point(g) -> bool:
    g = np.asarray(g, dtype=float)
    return bool(np.all(g == np.round(g)))


LATTICE_GENERATORS = (Heisenberg.element(1.0, 0.0, 0.0), Heisenberg.element(0.0, 1.0, 0.0))


def su2_cyclic_subgroup_diameter(k: int) -> float:
    """Diameter of the cyclic subgroup of SU(2) generated by a rotation of angle ``2 pi / k``."""
    su2 = SU2()
    g = su2.exp([0.0, 0.0, 2.0 * math.pi / k * 2.0])
    elems = [su2.power(g, j) for j in range(k)]
    return max(su2.distance(elems[0], e) for e in elems)


def su2_cyclic_subgroup_diameter_exact(k: int) -> Fraction:
    """Exact value of ``su2_cyclic_subgroup_diameter(k)``: the power ``j`` sits at ``min(j/k, 1 - j/k)``."""
    return Fraction(k // 2, k)


def lattice_points_in_ball(radius: float) -> list[tuple[int, int, int]]:
    """Integer Heisenberg points with gauge ``<= radius`` from the identity."""
    h = Heisenberg()
    r = int(math.floor(radius))
    out = []
    for x in range(-r, r + 1):
        for y in range(-r, r + 1):
            zr = int(math.ceil(radius * radius + abs(x * y))) + 1
            for z in range(-zr, zr + 1):
                g = h.element(x, y, z)
                if h.gauge(h.log(g)) <= radius:
                    out.append((x, y, z))
    return out


TARGETS = {"abelian": Abelian(1), "su2": SU2(), "heis3": Heisenberg()}


def get_target(name: str) -> Target:
    if name.startswith("abelian") and name[7:].isdigit():
        return Abelian(int(name[7:]))
    try:
        return TARGETS[name]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; expected one of {sorted(TARGETS)}") from None
