"""Barge-Ghys (BG) and homogeneous Barge-Ghys (HBG) quasimorphisms from a connection form.

BG: ``q(w)`` is the holonomy along the geodesic from 0 to ``rho(w) 0``.

HBG: write ``w = v key^(m) v^-1`` with ``key`` the class key of the primitive
root.  With ``h`` the holonomy once around the free loop from the marked
point ``x`` and ``S`` the holonomy of the connector from 0 to ``rho(v) x``,
``q(w) = S h^m S^-1``.  Both pieces are cached, so ``q`` restricted to a
cyclic subgroup is a homomorphism in floating point as well.
"""

from __future__ import annotations

import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from holoqm import free_qm
from holoqm.connection import (
    ConnectionForm,
    HolonomyResult,
    class_paths,
    curvature_bound,
    holonomy,
    prescribed_tube,
)
from holoqm.lie_targets import (
    HEISENBERG_COVERING_RADIUS,
    SU2,
    Heisenberg,
    Target,
    central_projection,
    lattice_round,
    su2_cyclic_subgroup_diameter,
    su2_cyclic_subgroup_diameter_exact,
)
from holoqm.surface_group import (
    FreePair,
    Leg,
    LiftedPoint,
    inverse,
    octagon_rep,
    random_word,
    reduce,
)

BG = "BG"
HBG = "HBG"


class CertificateError(RuntimeError):
    pass


@dataclass(frozen=True)
class HbgParts:
    """``q(w) = S h^m S^-1``."""

    S: np.ndarray
    h: np.ndarray
    m: int
    key: str
    conjugator: str
    verified: bool


class QuasimorphismEngine:
    def __init__(self, form: ConnectionForm, mode: str = HBG, tol: float = 1e-9, threads: int = 1):
        if mode not in (BG, HBG):
            raise ValueError(f"mode must be {BG!r} or {HBG!r}")
        self.form = form
        self.mode = mode
        self.tol = tol
        self.threads = threads
        self.rep = form.rep
        self._loops: dict[str, np.ndarray] = {}
        self._connectors: dict[tuple[str, str], np.ndarray] = {}
        self._bg: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def target(self) -> Target:
        return self.form.target

    def _store(self, cache: dict, key, compute):
        val = cache.get(key)
        if val is None:
            val = compute()
            with self._lock:
                val = cache.setdefault(key, val)
        return val

    # BG

    def bg_value(self, word: str) -> np.ndarray:
        word = reduce(word)
        if not word:
            return self.target.identity()
        leg = Leg(LiftedPoint("", 0j), LiftedPoint(word, 0j), self.rep)
        return self._store(self._bg, word, lambda: holonomy(self.form, leg, self.tol).value)

    # HBG

    def hbg_parts(self, word: str) -> HbgParts | None:
        word = reduce(word)
        if not word:
            return None
        cls = self.rep.conj_class_data(word)
        geom = cls.geometry
        h = self._store(self._loops, cls.key, lambda: holonomy(self.form, geom.loop(), self.tol).value)
        s = self._store(
            self._connectors,
            (cls.key, cls.conjugator),
            lambda: holonomy(self.form, cls.connector(), self.tol).value,
        )
        return HbgParts(s, h, cls.sign * cls.exponent, cls.key, cls.conjugator, cls.verified)

    def hbg_value(self, word: str) -> np.ndarray:
        return self.hbg_power(word, 1)

    def hbg_power(self, word: str, n: int) -> np.ndarray:
        """``q(word)^n`` assembled from the cached parts; equals ``q(word^n)`` bit for bit."""
        parts = self.hbg_parts(word)
        if parts is None:
            return self.target.identity()
        tg = self.target
        return tg.conjugate(parts.S, tg.power(parts.h, parts.m * n))

    def value(self, word: str) -> np.ndarray:
        return self.bg_value(word) if self.mode == BG else self.hbg_value(word)

    def values(self, words) -> list[np.ndarray]:
        words = list(words)
        if self.threads > 1 and len(words) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(self.value, words))
        return [self.value(w) for w in words]

    def __call__(self, word: str) -> np.ndarray:
        return self.value(word)


def bg_value(e: QuasimorphismEngine, word: str) -> np.ndarray:
    if e.mode != BG:
        raise ValueError("bg_value needs a BG engine")
    return e.bg_value(word)


def hbg_value(e: QuasimorphismEngine, word: str) -> np.ndarray:
    if e.mode != HBG:
        raise ValueError("hbg_value needs an HBG engine")
    return e.hbg_value(word)


def conjugator_holonomy(e: QuasimorphismEngine, alpha: str, beta: str) -> np.ndarray:
    """``R`` with ``q(beta) = R q(alpha) R^-1`` for conjugate ``alpha, beta`` (HBG engine).

    ``R`` is the holonomy from 0 to the marked point of ``beta`` followed by
    the way back from the marked point of ``alpha``.
    """
    pa, pb = e.hbg_parts(alpha), e.hbg_parts(beta)
    if pa is None or pb is None or pa.key != pb.key:
        raise ValueError("words are not conjugate")
    return e.target.mul(pb.S, e.target.inv(pa.S))


# ---------------------------------------------------------------- bounds


def bound_estimate(form: ConnectionForm, sides: int = 3, kappa: float | None = None) -> tuple[float, float]:
    """``(algebra bound, group-distance bound)`` for the holonomy around a geodesic ``sides``-gon.

    The polygon has area below ``(sides - 2) pi``; the algebra bound is the
    curvature integral dilated by ``exp`` of itself.
    """
    if kappa is None:
        kappa = curvature_bound(form)
    c = (sides - 2) * kappa * math.pi
    a = c * math.exp(c) if c < 700 else math.inf
    return a, form.target.distance_bound_from_algebra(a)


# ---------------------------------------------------------------- defects


def ball_samples(target: Target, rng: np.random.Generator, radius: float, n: int) -> list[np.ndarray]:
    """Identity followed by ``n - 1`` random elements within ``radius`` of it."""
    out = [target.identity()]
    for _ in range(n - 1):
        if isinstance(target, SU2):
            u = rng.normal(size=3)
            u *= rng.uniform(0, min(radius, 0.5)) * 4 * math.pi / np.linalg.norm(u)
        elif isinstance(target, Heisenberg):
            r = radius * rng.uniform()
            u = np.array([rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r * r, r * r)])
        else:
            u = rng.normal(size=target.dim)
            u *= rng.uniform(0, radius) / max(np.linalg.norm(u), 1e-300)
        out.append(target.exp(u))
    return out


@dataclass
class DefectReport:
    sample: dict
    max_ulam_defect: float
    max_geometric_defect: float
    bound_estimate: float
    per_length: dict[int, float]
    rows: list[dict] = field(default_factory=list)
    slope: float = 0.0
    slope_interval: tuple[float, float] = (0.0, 0.0)

    @property
    def slope_contains_zero(self) -> bool:
        lo, hi = self.slope_interval
        return lo <= 0.0 <= hi

    def summary(self) -> dict:
        return {
            "sample": self.sample,
            "max_ulam_defect": self.max_ulam_defect,
            "max_geometric_defect": self.max_geometric_defect,
            "bound_estimate": self.bound_estimate,
            "per_length": {str(k): v for k, v in sorted(self.per_length.items())},
            "slope": self.slope,
            "slope_interval": list(self.slope_interval),
            "slope_contains_zero": self.slope_contains_zero,
        }


def bootstrap_slope(lengths, defects, rng: np.random.Generator, n_boot: int = 1000) -> tuple[float, tuple[float, float]]:
    """Slope of per-length maxima against length, with a 95% bootstrap interval."""
    lengths = np.asarray(lengths)
    defects = np.asarray(defects, dtype=float)
    levels = np.unique(lengths)
    groups = [defects[lengths == L] for L in levels]
    if len(levels) < 2:
        return 0.0, (0.0, 0.0)
    slope = float(np.polyfit(levels, [g.max() for g in groups], 1)[0])
    boots = np.empty(n_boot)
    for k in range(n_boot):
        maxima = [g[rng.integers(0, g.size, g.size)].max() for g in groups]
        boots[k] = np.polyfit(levels, maxima, 1)[0]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return slope, (float(lo), float(hi))


def ulam_defect(
    e,
    pairs,
    seed: int = 0,
    allowance: float | None = None,
    n_conj: int = 8,
    bound: float | None = None,
    n_boot: int = 1000,
    witness=None,
) -> DefectReport:
    """Ulam and geometric defects of the map ``e`` (an engine or any word -> element callable).

    The geometric defect is the smallest ``d(q(xy), k q(x) k' q(y))`` over
    ``k, k'`` drawn from a ball of radius ``allowance`` (identity included),
    so it never exceeds the Ulam defect.  ``witness(x, y)`` may supply extra
    candidate pairs ``(k, k')``.
    """
    target = e.target
    pairs = [(reduce(x), reduce(y)) for x, y in pairs]
    if bound is None:
        bound = bound_estimate(e.form)[1] if hasattr(e, "form") else math.inf
    if allowance is None:
        allowance = bound if math.isfinite(bound) else 1.0
    rng = np.random.default_rng(seed)
    ks = ball_samples(target, rng, allowance, n_conj)
    rows = []
    for x, y in pairs:
        qx, qy, qxy = e(x), e(y), e(reduce(x + y))
        ulam = target.distance(qxy, target.mul(qx, qy))
        geo = ulam
        cands = [(k, k2) for k in ks for k2 in ks]
        if witness is not None:
            cands += witness(x, y)
        for k, k2 in cands:
            geo = min(geo, target.distance(qxy, target.mul(target.mul(k, qx), target.mul(k2, qy))))
        rows.append({"x": x, "y": y, "length": len(x), "ulam": ulam, "geometric": geo})
    per_length: dict[int, float] = {}
    for r in rows:
        per_length[r["length"]] = max(per_length.get(r["length"], 0.0), r["ulam"])
    slope, interval = bootstrap_slope([r["length"] for r in rows], [r["ulam"] for r in rows], rng, n_boot)
    return DefectReport(
        sample={"pairs": len(rows), "seed": seed, "allowance": allowance, "conjugators": n_conj},
        max_ulam_defect=max((r["ulam"] for r in rows), default=0.0),
        max_geometric_defect=max((r["geometric"] for r in rows), default=0.0),
        bound_estimate=bound,
        per_length=per_length,
        rows=rows,
        slope=slope,
        slope_interval=interval,
    )


def random_pairs(rng: np.random.Generator, lengths, count_per_length: int) -> list[tuple[str, str]]:
    return [(random_word(rng, L), random_word(rng, L)) for L in lengths for _ in range(count_per_length)]


def equivalence_distance(e1, e2, words) -> float:
    if e1.target != e2.target:
        raise TypeError("engines have different targets")
    tg = e1.target
    return max((tg.distance(e1(w), e2(w)) for w in words), default=0.0)


# ---------------------------------------------------------------- lattice rounding


class LatticeRoundedQM:
    """``q'(w) = lattice_round(q(w))`` for a Heisenberg engine."""

    def __init__(self, engine: QuasimorphismEngine):
        if not isinstance(engine.target, Heisenberg):
            raise TypeError("lattice rounding needs a Heisenberg engine")
        self.engine = engine
        self.target = engine.target
        self.form = engine.form

    def __call__(self, word: str) -> np.ndarray:
        return lattice_round(self.engine(word))

    def witness(self, x: str, y: str):
        """Conjugator pair moving ``q'(x) q'(y)`` back to ``q(x) q(y) k``: ``(1, k1^-1)``."""
        tg = self.target
        k1 = tg.mul(tg.inv(self.engine(x)), self(x))
        return [(tg.identity(), tg.inv(k1))]


@dataclass
class LatticeReport:
    words: int
    equivalence_distance: float
    covering_radius: float
    q_defect: DefectReport
    rounded_defect: DefectReport
    triangle_bound_ok: bool

    def summary(self) -> dict:
        return {
            "words": self.words,
            "equivalence_distance": self.equivalence_distance,
            "covering_radius": self.covering_radius,
            "within_covering_radius": bool(self.equivalence_distance <= self.covering_radius),
            "q_ulam_defect": self.q_defect.max_ulam_defect,
            "rounded_ulam_defect": self.rounded_defect.max_ulam_defect,
            "rounded_geometric_defect": self.rounded_defect.max_geometric_defect,
            "geometric_within_ulam_plus_4R": self.triangle_bound_ok,
        }


def lattice_geometric_qm(e: QuasimorphismEngine, words, pairs, seed: int = 0) -> tuple[LatticeRoundedQM, LatticeReport]:
    q2 = LatticeRoundedQM(e)
    r = HEISENBERG_COVERING_RADIUS
    dist = equivalence_distance(e, q2, words)
    dq = ulam_defect(e, pairs, seed=seed, allowance=r, n_boot=200)
    dr = ulam_defect(q2, pairs, seed=seed, allowance=r, bound=math.inf, n_boot=200, witness=q2.witness)
    ok = all(b["geometric"] <= a["ulam"] + 4 * r + 1e-12 for a, b in zip(dq.rows, dr.rows))
    return q2, LatticeReport(len(list(words)), dist, r, dq, dr, ok)


# ---------------------------------------------------------------- certificates


def vce_certificates(words: dict[str, str], pairs=None, free_pair: FreePair = FreePair()) -> list[dict]:
    """VCE certificates for named surface words lying in the image of the free pair.

    ``pairs`` defaults to all pairs of names.  Pairs outside the free
    subgroup are recorded as asserted, with a warning; a failed certificate
    raises ``CertificateError``.
    """
    names = list(words)
    if pairs is None:
        pairs = [(n1, n2) for i, n1 in enumerate(names) for n2 in names[i + 1 :]]
    out = []
    for n1, n2 in pairs:
        f1, f2 = free_pair.pull(words[n1]), free_pair.pull(words[n2])
        if f1 is None or f2 is None:
            warnings.warn(f"no certificate for ({words[n1]}, {words[n2]}); treated as user-asserted", stacklevel=2)
            out.append({"pair": [n1, n2], "verdict": "asserted"})
            continue
        cert = free_qm.vce_test(f1, f2)
        out.append({**cert.to_dict(), "names": [n1, n2]})
        if cert.verdict != free_qm.NOT_EQUIVALENT:
            raise CertificateError(f"VCE certificate failed for ({words[n1]}, {words[n2]})")
    return out


# ---------------------------------------------------------------- epsilon representations


@dataclass
class EpsilonRepReport:
    m: int
    epsilon_measured: float
    generator_values_distance: float
    b_power_check: float
    family: dict
    scaling: list[dict] = field(default_factory=list)
    certificate: dict = field(default_factory=dict)
    certificates: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "m": self.m,
            "epsilon_measured": self.epsilon_measured,
            "generator_values_distance": self.generator_values_distance,
            "b_power_check": self.b_power_check,
            "family": self.family,
            "scaling": self.scaling,
            "certificate": self.certificate,
            "vce": self.certificates,
        }


def kazhdan_pairs(rng: np.random.Generator, max_length: int = 1, lengths=(2, 3, 4, 5, 6), count: int = 12):
    """All pairs of words of length ``<= max_length`` plus random pairs of the given lengths."""
    from holoqm.surface_group import reduced_words

    short = list(reduced_words(max_length))
    pairs = [(x, y) for x in short for y in short]
    pairs += random_pairs(rng, lengths, count)
    family = {"all_pairs_max_length": max_length, "random_lengths": list(lengths), "random_per_length": count}
    return pairs, family


def epsilon_rep_build(
    generators,
    b: str,
    g,
    m: int,
    target: Target,
    pairs,
    family: dict | None = None,
    tol: float = 1e-10,
    tube_length: float = 0.6,
    tube_radius: float = 0.08,
    margin: float = 0.05,
) -> tuple[QuasimorphismEngine, EpsilonRepReport]:
    """HBG engine with ``q(a_i) = 1`` and ``q(b)^m = g`` from one tube on the loop of ``b``."""
    tg = target
    if tg.distance(g, tg.identity()) < 1e-12:
        raise ValueError("g = identity gives no obstruction")
    names = {"b": b, **{f"gen{k}": w for k, w in enumerate(generators)}}
    certs = vce_certificates(names, [("b", n) for n in names if n != "b"])
    rep = octagon_rep()
    avoid = [p for w in generators for p in class_paths(rep.conj_class_data(w))]
    cls_b = rep.conj_class_data(b)
    root = tg.exp(tg.log(g) / m)
    form = ConnectionForm(tg, (), rep)
    atom = prescribed_tube(cls_b, form, root, avoid, tol=tol, length=tube_length, radius=tube_radius)
    engine = QuasimorphismEngine(form.with_atom(atom), HBG, tol)
    gen_dist = max(tg.distance(engine(w), tg.identity()) for w in generators)
    b_pow = tg.distance(tg.power(engine(b), m), g)
    defect = ulam_defect(engine, pairs, bound=math.inf, n_conj=1, n_boot=10)
    dg = tg.distance(g, tg.identity())
    z3 = su2_cyclic_subgroup_diameter(3)
    certificate = {
        "d_g_identity": dg,
        "required": 1.0 / 3.0 + margin,
        "obstruction": dg >= 1.0 / 3.0 + margin,
        "z3_diameter": z3,
        "z3_diameter_exact": str(su2_cyclic_subgroup_diameter_exact(3)),
        "generator_values_at_identity": gen_dist <= tol,
    }
    report = EpsilonRepReport(m, defect.max_ulam_defect, gen_dist, b_pow, family or {}, [], certificate, certs)
    return engine, report


def kazhdan_scaling(
    generators, b: str, g, m0: int, target: Target, pairs, family=None, doublings: int = 3, **kw
) -> EpsilonRepReport:
    """``epsilon_rep_build`` for ``m = m0, 2 m0, ..., 2^doublings m0`` with halving ratios."""
    rows = []
    first = None
    for k in range(doublings + 1):
        m = m0 * 2**k
        _, rep = epsilon_rep_build(generators, b, g, m, target, pairs, family, **kw)
        first = first or rep
        row = {
            "m": m,
            "epsilon": rep.epsilon_measured,
            "b_power_check": rep.b_power_check,
            "generator_values_distance": rep.generator_values_distance,
        }
        if rows:
            row["ratio"] = rep.epsilon_measured / rows[-1]["epsilon"]
        rows.append(row)
    first.scaling = rows
    return first


# ---------------------------------------------------------------- Heisenberg lab


@dataclass
class LabReport:
    residuals: list[float]
    trivial_values: dict[str, float]
    centrality: list[dict]
    growth: list[dict]
    lattice: dict | None
    step3_tubes: list[str]
    certificates: list[dict]

    def summary(self) -> dict:
        return {
            "max_residual": max(self.residuals, default=0.0),
            "residuals": self.residuals,
            "trivial_values": self.trivial_values,
            "centrality": self.centrality,
            "growth": [{k: v for k, v in g.items() if k != "norms"} for g in self.growth],
            "lattice": self.lattice,
            "step3_tubes": self.step3_tubes,
            "vce": self.certificates,
        }


def _linear_fit_r2(n, y) -> float:
    n, y = np.asarray(n, dtype=float), np.asarray(y, dtype=float)
    coef = np.polyfit(n, y, 1)
    resid = y - np.polyval(coef, n)
    tot = np.sum((y - y.mean()) ** 2)
    return 1.0 if tot == 0 else float(1.0 - np.sum(resid**2) / tot)


def nonconstructible_lab(
    x_words,
    lattice_gens,
    a: str = "a",
    b: str = "c",
    exponent_pairs=((1, 2), (2, 3), (1, 3)),
    n_max: int = 12,
    tol: float = 1e-13,
    tubes: bool = True,
    lattice_words=None,
    lattice_pairs=None,
    seed: int = 0,
    tube_length: float = 0.6,
    tube_radius: float = 0.08,
) -> tuple[QuasimorphismEngine, LabReport]:
    """Heisenberg HBG engine with ``q(x_k) = g_k``, ``q(a) = q(b) = 1`` and non-central ``q(a^i b^j)``."""
    tg = Heisenberg()
    rep = octagon_rep()
    words = {f"x{k}": w for k, w in enumerate(x_words)} | {"a": a, "b": b}
    certs = vce_certificates(words)
    zs = [reduce(a * i + b * j) for i, j in exponent_pairs]
    fixed = [rep.conj_class_data(w) for w in list(x_words) + [a, b]]
    avoid_all = [p for c in fixed for p in class_paths(c)]
    form = ConnectionForm(tg, (), rep)
    step3 = []
    if tubes:
        for k, (w, g) in enumerate(zip(x_words, lattice_gens)):
            cls = rep.conj_class_data(w)
            others = [p for j, c in enumerate(fixed) if j != k for p in class_paths(c)]
            atom = prescribed_tube(cls, form, g, others, tol=tol, length=tube_length, radius=tube_radius)
            form = form.with_atom(atom)
        engine = QuasimorphismEngine(form, HBG, tol)
        for i, z in enumerate(zs):
            if tg.is_central(engine(z), 1e-9):
                cls = rep.conj_class_data(z)
                want = tg.mul(engine(z), tg.exp([0.25, 0.25 * (i + 1), 0.0]))
                atom = prescribed_tube(cls, form, want, avoid_all, tol=tol, length=tube_length, radius=tube_radius)
                form = form.with_atom(atom)
                engine = QuasimorphismEngine(form, HBG, tol)
                step3.append(z)
    engine = QuasimorphismEngine(form, HBG, tol)
    residuals = [tg.distance(engine(w), g) for w, g in zip(x_words, lattice_gens)] if tubes else []
    trivial = {"a": tg.distance(engine(a), tg.identity()), "b": tg.distance(engine(b), tg.identity())}
    centrality, growth = [], []
    for (i, j), z in zip(exponent_pairs, zs):
        qz = engine(z)
        centrality.append({"i": i, "j": j, "word": z, "is_central": tg.is_central(qz, 1e-9), "projection": central_projection(qz).tolist()})
        p1 = central_projection(qz)
        ns = list(range(1, n_max + 1))
        projs = [central_projection(engine(reduce(z * n))) for n in ns]
        exact = all(np.array_equal(p, n * p1) for n, p in zip(ns, projs))
        powers_agree = all(np.array_equal(engine(reduce(z * n)), engine.hbg_power(z, n)) for n in ns)
        norms = [float(np.linalg.norm(p)) for p in projs]
        growth.append({"i": i, "j": j, "r2": _linear_fit_r2(ns, norms), "exact_linear": exact, "powers_agree": powers_agree, "norms": norms})
    lattice = None
    if lattice_words is not None:
        _, lrep = lattice_geometric_qm(engine, lattice_words, lattice_pairs or [], seed)
        lattice = lrep.summary()
    return engine, LabReport(residuals, trivial, centrality, growth, lattice, step3, certs)
