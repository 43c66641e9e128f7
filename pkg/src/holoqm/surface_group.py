"""The genus-2 surface group realized as the regular-octagon Fuchsian group.

Words are strings over ``abcd`` with uppercase letters for inverses.  Letter
``k`` (a=0, ..., d=3) is the translation ``R_k T R_k^{-1}`` through the centre
of the octagon, pairing the side in direction ``pi + k pi/4`` with the side in
direction ``k pi/4``.  With these side pairings the defining relator is
``aBcDAbCd``.
"""

from __future__ import annotations

import cmath
import functools
import math
import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from holoqm.hyp2 import (
    Axis,
    DomainError,
    GeodesicSegment,
    IsometryType,
    Moebius,
    axis,
    check_point,
    classify,
    translation_length,
)

ALPHABET = "abcd"
LETTERS = "abcdABCD"
RELATOR = "aBcDAbCd"

COSH_HALF_TRANSLATION = 1.0 + math.sqrt(2.0)
GENERATOR_TRANSLATION_LENGTH = 2.0 * math.acosh(COSH_HALF_TRANSLATION)
# systole of the regular-octagon (Bolza) surface: realized by the generators
SYSTOLE = GENERATOR_TRANSLATION_LENGTH
# circumradius of the regular octagon with vertex angle pi/4: cosh R = cot(pi/8)^2
OCTAGON_CIRCUMRADIUS = math.acosh(1.0 / math.tan(math.pi / 8) ** 2)
INRADIUS = 0.5 * GENERATOR_TRANSLATION_LENGTH

# min Frobenius distance from +-I over nontrivial elements; generated by
# scripts/discreteness_gap.py (exhaustive over reduced words of length <= 5)
DISCRETENESS_GAP = 3.6955181300451505

MAX_REDUCTION_STEPS = 10**6
# legs longer than twice this are evaluated in re-anchored frames
LEG_CHUNK = 2.0


class AmbiguityError(ArithmeticError):
    """Identity test fell inside the discreteness margin; needs more precision."""


class PrecisionError(ArithmeticError):
    pass


# ---------------------------------------------------------------- words


def _check_letters(word: str) -> None:
    bad = set(word) - set(LETTERS)
    if bad:
        raise ValueError(f"invalid letters {sorted(bad)} in word {word!r}")


def reduce(word: str) -> str:
    """Free reduction."""
    _check_letters(word)
    out: list[str] = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def inverse(word: str) -> str:
    return word[::-1].swapcase()


def power(word: str, n: int) -> str:
    return reduce(word * n) if n >= 0 else reduce(inverse(word) * (-n))


def cyclic_reduce(word: str) -> tuple[str, str]:
    """Split a reduced word as ``u c u^-1`` with ``c`` cyclically reduced."""
    word = reduce(word)
    i, j = 0, len(word)
    while j - i >= 2 and word[i] == word[j - 1].swapcase():
        i += 1
        j -= 1
    return word[:i], word[i:j]


def minimal_rotation(word: str) -> str:
    if not word:
        return word
    return min(word[k:] + word[:k] for k in range(len(word)))


def random_word(rng: np.random.Generator, length: int, alphabet: str = ALPHABET) -> str:
    """Uniform random freely reduced word of the given length."""
    letters = alphabet + alphabet.upper()
    out: list[str] = []
    while len(out) < length:
        ch = letters[rng.integers(len(letters))]
        if out and out[-1] == ch.swapcase():
            continue
        out.append(ch)
    return "".join(out)


def reduced_words(max_length: int, alphabet: str = ALPHABET):
    """All nonempty reduced words of length ``<= max_length``, shortest first."""
    letters = alphabet + alphabet.upper()
    level = [""]
    for _ in range(max_length):
        nxt = []
        for w in level:
            for ch in letters:
                if w and w[-1] == ch.swapcase():
                    continue
                nxt.append(w + ch)
        yield from nxt
        level = nxt


# ---------------------------------------------------------------- representation


def _generator(k: int) -> Moebius:
    c = COSH_HALF_TRANSLATION
    t = Moebius(complex(c), complex(math.sqrt(c * c - 1.0)))
    r = Moebius.rotation(k * math.pi / 4)
    return r @ t @ r.inverse()


def generator_matrices_mp(dps: int = 40) -> dict[str, "mpmath.matrix"]:
    """Generator matrices in mpmath at ``dps`` digits, for certification runs."""
    import mpmath

    with mpmath.workdps(dps):
        c = 1 + mpmath.sqrt(2)
        s = mpmath.sqrt(c * c - 1)
        t = mpmath.matrix([[c, s], [s, c]])
        out = {}
        for k, ch in enumerate(ALPHABET):
            e = mpmath.exp(1j * k * mpmath.pi / 8)
            r = mpmath.matrix([[e, 0], [0, mpmath.conj(e)]])
            g = r * t * r**-1
            out[ch] = g
            out[ch.upper()] = g**-1
    return out


def relator_residual_mp(dps: int = 40, word: str = RELATOR) -> float:
    """Distance of the high-precision image of ``word`` from +-I."""
    import mpmath

    gens = generator_matrices_mp(dps)
    with mpmath.workdps(dps):
        m = mpmath.eye(2)
        for ch in word:
            m = m * gens[ch]
        eye = mpmath.eye(2)
        return float(min(mpmath.mnorm(m - eye, "f"), mpmath.mnorm(m + eye, "f")))


class FuchsianRep:
    """Immutable regular-octagon representation of the genus-2 surface group."""

    def __init__(self):
        self.gens: dict[str, Moebius] = {}
        for k, ch in enumerate(ALPHABET):
            g = _generator(k)
            self.gens[ch] = g
            self.gens[ch.upper()] = g.inverse()
        r = math.tanh(0.5 * OCTAGON_CIRCUMRADIUS)
        self.octagon_vertices = tuple(
            r * cmath.exp(1j * (math.pi / 8 + k * math.pi / 4)) for k in range(8)
        )
        self._letters = LETTERS
        self._ga = np.array([self.gens[ch].a for ch in LETTERS])
        self._gb = np.array([self.gens[ch].b for ch in LETTERS])
        self._shell: list[tuple[str, Moebius]] = []
        self._shell_radius = -1.0
        self._shell_lock = threading.Lock()

    # words -> isometries

    @functools.lru_cache(maxsize=200_000)
    def rep_matrix(self, word: str) -> Moebius:
        word = reduce(word)
        if not word:
            return Moebius.identity()
        if len(word) == 1:
            return self.gens[word]
        half = len(word) // 2
        return self.rep_matrix(word[:half]) @ self.rep_matrix(word[half:])

    def is_identity(self, word: str) -> bool:
        d = self.rep_matrix(reduce(word)).distance_to_identity()
        if d < 0.5 * DISCRETENESS_GAP:
            return True
        # the gap itself is attained (by the generators), so allow for rounding
        if d < DISCRETENESS_GAP * (1.0 - 1e-9):
            raise AmbiguityError(f"word {word!r} at matrix distance {d} from +-I")
        return False

    def translation_length(self, word: str) -> float:
        # conjugation invariant, and the cyclically reduced word has the smallest entries
        return translation_length(self.rep_matrix(cyclic_reduce(word)[1]))

    # fundamental domain

    def reduce_points(self, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized Dirichlet reduction.

        Returns ``(z_red, a, b)`` with ``z_red = M(z)`` for the isometry
        ``M = [[a, b], [conj b, conj a]]`` accumulated per point.
        """
        z = np.array(z, dtype=complex, ndmin=1, copy=True)
        a = np.ones_like(z)
        b = np.zeros_like(z)
        ga, gb = self._ga[:, None], self._gb[:, None]
        active = np.ones(z.shape, dtype=bool)
        for _ in range(MAX_REDUCTION_STEPS):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                return z, a, b
            zi = z[idx]
            imgs = (ga * zi + gb) / (gb.conj() * zi + ga.conj())
            best = np.argmin(np.abs(imgs), axis=0)
            cand = imgs[best, np.arange(idx.size)]
            gain = np.arctanh(np.minimum(np.abs(zi), 1 - 1e-17)) - np.arctanh(np.abs(cand))
            move = gain > 1e-12
            active[idx[~move]] = False
            mi = idx[move]
            g_a, g_b = self._ga[best[move]], self._gb[best[move]]
            z[mi] = cand[move]
            a[mi], b[mi] = g_a * a[mi] + g_b * b[mi].conj(), g_a * b[mi] + g_b * a[mi].conj()
        raise PrecisionError("Dirichlet reduction did not terminate")

    def dirichlet_reduce(self, z: complex) -> tuple[complex, str]:
        """Greedy reduction into the octagon: returns ``(z', w)`` with ``z' = rho(w) z``."""
        z = check_point(z)
        word = ""
        for _ in range(MAX_REDUCTION_STEPS):
            best, best_ch = z, None
            for ch in LETTERS:
                img = self.gens[ch](z)
                if abs(img) < abs(best):
                    best, best_ch = img, ch
            if best_ch is None or math.atanh(abs(z)) - math.atanh(abs(best)) <= 1e-12:
                return z, reduce(word)
            z = best
            word = best_ch + word
        raise PrecisionError(f"Dirichlet reduction of {z!r} did not terminate")

    def reduce_frame(self, frame: Moebius) -> Moebius:
        """``rho(w) frame`` with ``rho(w) frame(0)`` in the octagon, using only matrix products.

        Unlike reducing the point ``frame(0)``, this keeps relative precision
        when ``frame`` moves the origin far towards the boundary.
        """
        for _ in range(MAX_REDUCTION_STEPS):
            best, size = frame, abs(frame.b)
            for g in self.gens.values():
                cand = g @ frame
                if abs(cand.b) < size:
                    best, size = cand, abs(cand.b)
            if best is frame or math.asinh(abs(frame.b)) - math.asinh(size) <= 1e-12:
                return frame
            frame = best
        raise PrecisionError("frame reduction did not terminate")

    def shell(self, radius: float | None = None) -> list[tuple[str, Moebius]]:
        """Elements moving 0 by at most ``radius`` (default: twice the circumradius plus 1).

        Breadth-first search over tiles; a tile within ``radius`` is reached
        through adjacent tiles whose centres stay within ``radius + R``.
        """
        if radius is None:
            radius = 2 * OCTAGON_CIRCUMRADIUS + 1.0
        with self._shell_lock:
            if radius > self._shell_radius:
                self._shell = self._grow_shell(radius)
                self._shell_radius = radius
            shell = self._shell
        return [(w, m) for w, m in shell if 2 * math.atanh(abs(m(0.0))) <= radius + 1e-9]

    def _grow_shell(self, radius: float) -> list[tuple[str, Moebius]]:
        prune = radius + OCTAGON_CIRCUMRADIUS + 0.5
        seen: dict[tuple[float, float], tuple[str, Moebius]] = {(0.0, 0.0): ("", Moebius.identity())}
        frontier = [("", Moebius.identity())]
        while frontier:
            nxt = []
            for w, m in frontier:
                for ch in LETTERS:
                    if w and w[-1] == ch.swapcase():
                        continue
                    g = m @ self.gens[ch]
                    p = g(0.0)
                    key = (round(p.real, 9), round(p.imag, 9))
                    if key in seen or 2 * math.atanh(abs(p)) > prune:
                        continue
                    seen[key] = (w + ch, g)
                    nxt.append((w + ch, g))
            frontier = nxt
        return sorted(seen.values(), key=lambda wm: (len(wm[0]), wm[0]))

    # conjugacy classes

    def primitive_root(self, word: str, search_length: int = 4) -> PrimitiveRoot:
        word = reduce(word)
        if not word:
            raise DomainError("the identity has no primitive root")
        u, c = cyclic_reduce(word)
        n = len(c)
        period = next(p for p in range(1, n + 1) if n % p == 0 and c[:p] * (n // p) == c)
        root, exponent = c[:period], n // period
        if classify(self.rep_matrix(root)) is not IsometryType.HYPERBOLIC:
            raise DomainError(f"word {word!r} does not map to a hyperbolic element")
        tau = self.translation_length(root)
        verified = tau < 2 * SYSTOLE - 1e-9
        if not verified:
            found = self._search_root(root, tau, search_length)
            if found is not None:
                v, k = found
                root, exponent = v, exponent * k
            verified = found is not None or search_length >= len(root)
        return PrimitiveRoot(reduce(u + root + inverse(u)), exponent, verified)

    def _search_root(self, root: str, tau: float, max_len: int):
        kmax = int(tau / SYSTOLE + 1e-9)
        target = self.rep_matrix(root)
        for k in range(kmax, 1, -1):
            for v in reduced_words(max_len):
                m = self.rep_matrix(v)
                if classify(m) is not IsometryType.HYPERBOLIC:
                    continue
                if abs(k * translation_length(m) - tau) > 1e-7:
                    continue
                if (m.power(k) @ target.inverse()).distance_to_identity() < 0.5 * DISCRETENESS_GAP:
                    return v, k
        return None

    @functools.cached_property
    def _class_cache(self) -> dict[str, ClassGeometry]:
        return {}

    _class_lock = threading.Lock()

    def class_geometry(self, key: str) -> ClassGeometry:
        cache = self._class_cache
        geom = cache.get(key)
        if geom is None:
            m = self.rep_matrix(key)
            ax = axis(m)
            geom = ClassGeometry(key, ax, ax.foot, translation_length(m))
            with self._class_lock:
                geom = cache.setdefault(key, geom)
        return geom

    def conj_class_data(self, word: str) -> ConjClassRep:
        """Primitive root, exponent, canonical marked point and connector for ``word``.

        ``word = v * key^(sign * exponent) * v^-1`` freely, where ``key`` is the
        class key of the primitive root (or of its inverse, whichever is
        lexicographically smaller, so that inverse classes share a marked point).
        """
        word = reduce(word)
        pr = self.primitive_root(word)
        u, r = cyclic_reduce(pr.root)
        kr, ki = minimal_rotation(r), minimal_rotation(inverse(r))
        if kr <= ki:
            j = next(j for j in range(len(r)) if r[j:] + r[:j] == kr)
            conj, sign, key = reduce(u + r[:j]), 1, kr
        else:
            ri = inverse(r)
            j = next(j for j in range(len(ri)) if ri[j:] + ri[:j] == ki)
            conj, sign, key = reduce(u + ri[:j]), -1, ki
        geom = self.class_geometry(key)
        return ConjClassRep(
            word=word,
            key=key,
            sign=sign,
            exponent=pr.exponent,
            conjugator=conj,
            primitive_root=pr.root,
            verified=pr.verified,
            geometry=geom,
        )


class PrimitiveRoot(NamedTuple):
    root: str
    exponent: int
    verified: bool


@dataclass(frozen=True)
class ClassGeometry:
    """Canonical lift data of a primitive conjugacy class, keyed by its cyclic word."""

    key: str
    axis: Axis
    marked_point: complex
    translation_length: float

    def loop(self) -> Leg:
        """Lift of the free geodesic loop from the marked point to ``key . marked point``."""
        return Leg(LiftedPoint("", self.marked_point), LiftedPoint(self.key, self.marked_point))


@dataclass(frozen=True)
class ConjClassRep:
    word: str
    key: str
    sign: int
    exponent: int
    conjugator: str
    primitive_root: str
    verified: bool
    geometry: ClassGeometry

    @property
    def marked_point(self) -> LiftedPoint:
        return LiftedPoint(self.conjugator, self.geometry.marked_point)

    def connector(self) -> Leg:
        """Geodesic from the basepoint lift 0 to the marked point on this element's axis."""
        return Leg(LiftedPoint("", 0j), self.marked_point)

    def axis_window(self, rep: FuchsianRep) -> GeodesicSegment:
        g = rep.rep_matrix(self.conjugator)
        ax = self.geometry.axis
        return GeodesicSegment(g(ax.point_at(0.0)), g(ax.point_at(self.geometry.translation_length)))


@dataclass(frozen=True)
class FreePair:
    u: str = "a"
    v: str = "c"

    def embed(self, free_word: str) -> str:
        """Map a word over ``ab`` (uppercase inverse) into the surface group."""
        table = {"a": self.u, "b": self.v, "A": inverse(self.u), "B": inverse(self.v)}
        return reduce("".join(table[ch] for ch in free_word))

    def pull(self, word: str) -> str | None:
        """Preimage over ``ab`` of a surface word in the image, or None (single-letter pairs only)."""
        if len(self.u) != 1 or len(self.v) != 1:
            return None
        table = {self.u: "a", self.v: "b", self.u.upper(): "A", self.v.upper(): "B"}
        word = reduce(word)
        if set(word) - set(table):
            return None
        return "".join(table[ch] for ch in word)

    def freeness_margin(self, rep: FuchsianRep, max_length: int = 12) -> float:
        """Min distance from +-I over nontrivial reduced words in u, v of bounded length."""
        gens = [rep.rep_matrix(w) for w in (self.u, self.v, inverse(self.u), inverse(self.v))]
        ga = np.array([g.a for g in gens])
        gb = np.array([g.b for g in gens])
        a, b, last = ga.copy(), gb.copy(), np.arange(4)
        best = math.inf
        for _ in range(max_length):
            d = np.minimum(
                np.sqrt(2 * np.abs(a - 1) ** 2 + 2 * np.abs(b) ** 2),
                np.sqrt(2 * np.abs(a + 1) ** 2 + 2 * np.abs(b) ** 2),
            )
            best = min(best, float(d.min()))
            na, nb, nl = [], [], []
            for k in range(4):
                keep = last != (k + 2) % 4
                na.append(a[keep] * ga[k] + b[keep] * gb[k].conjugate())
                nb.append(a[keep] * gb[k] + b[keep] * ga[k].conjugate())
                nl.append(np.full(int(keep.sum()), k))
            a, b, last = np.concatenate(na), np.concatenate(nb), np.concatenate(nl)
            a = a / np.abs(a) * np.hypot(1.0, np.abs(b))
        return best


# ---------------------------------------------------------------- lifted paths


@dataclass(frozen=True)
class LiftedPoint:
    """The disk point ``rho(word) . local``."""

    word: str
    local: complex

    def to_disk(self, rep: FuchsianRep) -> complex:
        return rep.rep_matrix(self.word)(self.local)

    def translate(self, word: str) -> LiftedPoint:
        return LiftedPoint(reduce(word + self.word), self.local)


class Leg:
    """Geodesic segment between two lifted points.

    The far endpoint is never formed in disk coordinates: the first half is
    parametrized in the frame of ``start`` and the second half in the frame of
    ``end``.  Connection forms are invariant, so the two frames are
    interchangeable for holonomy.
    """

    def __init__(self, start: LiftedPoint, end: LiftedPoint, rep: FuchsianRep | None = None):
        rep = rep or octagon_rep()
        self.start, self.end = start, end
        p1, p2 = check_point(start.local), check_point(end.local)
        n = (
            Moebius.translation(p1).inverse()
            @ rep.rep_matrix(reduce(inverse(start.word) + end.word))
            @ Moebius.translation(p2)
        )
        self.length = 2.0 * math.asinh(abs(n.b))
        phi1 = cmath.phase(n.b / n.a.conjugate()) if abs(n.b) > 0 else 0.0
        phi2 = cmath.phase(-n.b / n.a) if abs(n.b) > 0 else math.pi
        self.front = Moebius.translation(p1) @ Moebius.rotation(phi1)
        self.back = Moebius.translation(p2) @ Moebius.rotation(phi2)
        self._rep = rep
        self._anchors: dict[tuple[bool, int], Moebius] = {}

    def _anchor(self, front: bool, k: int) -> Moebius:
        """Frame at arclength ``k * LEG_CHUNK`` from one end, pulled back towards the octagon."""
        key = (front, k)
        f = self._anchors.get(key)
        if f is None:
            base = self.front if front else self.back
            f = self._rep.reduce_frame(base @ Moebius.real_translation(k * LEG_CHUNK))
            self._anchors[key] = f
        return f

    @classmethod
    def from_segment(cls, seg: GeodesicSegment) -> Leg:
        return cls(LiftedPoint("", seg.start), LiftedPoint("", seg.end))

    def reversed(self) -> Leg:
        return Leg(self.end, self.start)

    def points_tangents(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Local points and unit-speed tangents at arclengths ``s`` (array)."""
        s = np.asarray(s, dtype=float)
        half = s <= 0.5 * self.length
        t = np.where(half, s, self.length - s)
        if self.length <= 2 * LEG_CHUNK:
            x = np.tanh(0.5 * t)
            speed = 0.5 * (1.0 - x * x)
            zf, zb = self.front(x), self.back(x)
            vf = self.front.derivative(x) * speed
            vb = -self.back.derivative(x) * speed
            return np.where(half, zf, zb), np.where(half, vf, vb)
        # long legs: evaluate each stretch in its own re-anchored frame
        k = np.floor(t / LEG_CHUNK).astype(int)
        x = np.tanh(0.5 * (t - k * LEG_CHUNK))
        speed = 0.5 * (1.0 - x * x)
        z = np.empty(t.shape, dtype=complex)
        v = np.empty(t.shape, dtype=complex)
        for fr, kk in {(bool(f), int(j)) for f, j in zip(half.ravel(), k.ravel())}:
            sel = (half == fr) & (k == kk)
            f = self._anchor(fr, kk)
            z[sel] = f(x[sel])
            v[sel] = f.derivative(x[sel]) * speed[sel] * (1.0 if fr else -1.0)
        return z, v

    def __repr__(self):
        return f"Leg({self.start!r} -> {self.end!r}, length={self.length:.6g})"


@functools.lru_cache(maxsize=None)
def octagon_rep() -> FuchsianRep:
    return FuchsianRep()


def word_pairs(rng: np.random.Generator, lengths, count_per_length: int):
    for L in lengths:
        for _ in range(count_per_length):
            yield random_word(rng, L), random_word(rng, L)

