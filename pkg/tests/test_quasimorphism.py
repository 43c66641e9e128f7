import math

import numpy as np
import pytest

from holoqm.connection import ConnectionForm, line_integral, random_ball_form, stokes_integral
from holoqm.lie_targets import HEISENBERG_COVERING_RADIUS, LATTICE_GENERATORS, Abelian, Heisenberg, SU2, is_lattice_point
from holoqm.quasimorphism import (
    BG,
    HBG,
    CertificateError,
    QuasimorphismEngine,
    bg_value,
    bootstrap_slope,
    bound_estimate,
    conjugator_holonomy,
    epsilon_rep_build,
    equivalence_distance,
    hbg_value,
    kazhdan_pairs,
    kazhdan_scaling,
    lattice_geometric_qm,
    nonconstructible_lab,
    random_pairs,
    ulam_defect,
    vce_certificates,
)
from holoqm.surface_group import Leg, LiftedPoint, inverse, random_word, reduce

su2, heis, ab = SU2(), Heisenberg(), Abelian(1)
TOL = 1e-10


@pytest.fixture(scope="module")
def su2_form():
    return random_ball_form(su2, np.random.default_rng(5), 3, radius=0.4, amplitude=0.3)


@pytest.fixture(scope="module")
def heis_form():
    return random_ball_form(heis, np.random.default_rng(6), 3, radius=0.4, amplitude=0.3)


def words(seed, n, max_len=6):
    rng = np.random.default_rng(seed)
    return [random_word(rng, int(rng.integers(1, max_len + 1))) for _ in range(n)]


# ---------------------------------------------------------------- basic values


@pytest.mark.parametrize("mode", [BG, HBG])
def test_trivial_connection(mode):
    e = QuasimorphismEngine(ConnectionForm(su2), mode)
    for w in ["", "a", "abAB", "aBcD", "dddc"]:
        assert np.array_equal(e(w), su2.identity())


def test_empty_word(su2_form):
    for mode in (BG, HBG):
        assert np.array_equal(QuasimorphismEngine(su2_form, mode)(""), su2.identity())


def test_mode_checks(su2_form):
    with pytest.raises(ValueError):
        QuasimorphismEngine(su2_form, "XYZ")
    with pytest.raises(ValueError):
        bg_value(QuasimorphismEngine(su2_form, HBG), "a")
    with pytest.raises(ValueError):
        hbg_value(QuasimorphismEngine(su2_form, BG), "a")


@pytest.mark.parametrize("mode", [BG, HBG])
def test_inverse_symmetry(su2_form, mode):
    e = QuasimorphismEngine(su2_form, mode, TOL)
    for w in words(1, 15):
        assert su2.distance(e(inverse(w)), su2.inv(e(w))) <= 2 * TOL + 1e-12


def test_bg_abelian_matches_quadrature():
    form = random_ball_form(ab, np.random.default_rng(2), 3)
    e = QuasimorphismEngine(form, BG, 1e-11)
    for w in words(3, 8, 4):
        leg = Leg(LiftedPoint("", 0j), LiftedPoint(w, 0j))
        assert abs(bg_value(e, w)[0] - line_integral(form, leg)[0]) < 1e-8


# ---------------------------------------------------------------- HBG


def test_hbg_homogeneity_bitwise(heis_form):
    e = QuasimorphismEngine(heis_form, HBG, TOL)
    for w in words(4, 20, 5):
        for n in range(1, 9):
            assert np.array_equal(e(reduce(w * n)), e.hbg_power(w, n))
            assert np.array_equal(e(reduce(w * n)), e.hbg_power(reduce(w * n), 1))


def test_hbg_repeated_queries_identical(su2_form):
    e = QuasimorphismEngine(su2_form, HBG, TOL)
    for w in words(5, 10):
        first = e(w).copy()
        assert np.array_equal(e(w), first)
        assert np.array_equal(QuasimorphismEngine(su2_form, HBG, TOL)(w), first)


def test_hbg_matrix_power_close(su2_form):
    e = QuasimorphismEngine(su2_form, HBG, TOL)
    for w in words(6, 10, 4):
        for n in range(2, 5):
            assert su2.distance(e(reduce(w * n)), np.linalg.matrix_power(e(w), n)) < 1e-12


def test_conjugate_words_conjugate_values(su2_form):
    e = QuasimorphismEngine(su2_form, HBG, TOL)
    rng = np.random.default_rng(8)
    for _ in range(10):
        u = random_word(rng, 4)
        v = random_word(rng, 2)
        w = reduce(v + u + inverse(v))
        assert np.trace(e(u)).real == pytest.approx(np.trace(e(w)).real, abs=1e-6)
        r = conjugator_holonomy(e, u, w)
        assert np.max(np.abs(su2.conjugate(r, e(u)) - e(w))) < 1e-9


def test_conjugator_requires_conjugate_words(su2_form):
    with pytest.raises(ValueError):
        conjugator_holonomy(QuasimorphismEngine(su2_form, HBG), "a", "b")


# ---------------------------------------------------------------- defects and bounds


def test_trivial_defect_zero():
    e = QuasimorphismEngine(ConnectionForm(heis), BG)
    rep = ulam_defect(e, random_pairs(np.random.default_rng(0), [2, 3], 5), n_boot=50)
    assert rep.max_ulam_defect == 0.0 and rep.max_geometric_defect == 0.0


def test_geometric_below_ulam(heis_form):
    e = QuasimorphismEngine(heis_form, BG, TOL)
    rep = ulam_defect(e, random_pairs(np.random.default_rng(1), [2, 3, 4], 8), n_boot=50)
    assert rep.max_geometric_defect <= rep.max_ulam_defect
    assert all(r["geometric"] <= r["ulam"] for r in rep.rows)
    assert set(rep.per_length) == {2, 3, 4}


def test_abelian_defect_is_stokes():
    form = random_ball_form(ab, np.random.default_rng(9), 2, radius=0.5)
    e = QuasimorphismEngine(form, BG, 1e-11)
    rep = form.rep
    for x, y in [("a", "b"), ("c", "D"), ("ab", "c")]:
        d = ulam_defect(e, [(x, y)], n_boot=10).rows[0]["ulam"]
        tri = [0j, rep.rep_matrix(x)(0.0), rep.rep_matrix(x + y)(0.0)]
        assert abs(d - abs(stokes_integral(form, tri)[0])) < 1e-6


def test_bound_estimate_formula(su2_form):
    a, d = bound_estimate(su2_form, kappa=0.1)
    c = 0.1 * math.pi
    assert a == pytest.approx(c * math.exp(c))
    assert d == pytest.approx(min(a / (4 * math.pi), 0.5))
    a4, _ = bound_estimate(su2_form, sides=4, kappa=0.1)
    assert a4 > a
    assert bound_estimate(ConnectionForm(su2))[0] == 0.0


def test_bootstrap_slope():
    rng = np.random.default_rng(0)
    lengths = np.repeat(np.arange(2, 11), 40)
    flat = rng.uniform(0, 1, lengths.size)
    _, (lo, hi) = bootstrap_slope(lengths, flat, rng, 300)
    assert lo <= 0 <= hi
    rising = lengths * 0.5 + rng.uniform(0, 0.1, lengths.size)
    slope, (lo, hi) = bootstrap_slope(lengths, rising, rng, 300)
    assert slope == pytest.approx(0.5, abs=0.05) and lo > 0


def test_equivalence_distance(heis_form):
    e = QuasimorphismEngine(heis_form, HBG, TOL)
    ws = words(10, 10, 4)
    # the gauge takes a square root of the central entry, so rounding shows at 1e-9
    assert equivalence_distance(e, e, ws) <= 1e-8
    bg = QuasimorphismEngine(heis_form, BG, TOL)
    _, k4 = bound_estimate(heis_form, sides=4)
    assert equivalence_distance(e, bg, ws) <= k4
    with pytest.raises(TypeError):
        equivalence_distance(e, QuasimorphismEngine(ConnectionForm(su2)), ws)


def test_equivalence_trivial_connection():
    f = ConnectionForm(su2)
    assert equivalence_distance(QuasimorphismEngine(f, BG), QuasimorphismEngine(f, HBG), words(0, 10)) <= 2e-9


# ---------------------------------------------------------------- lattice rounding


def test_lattice_rounding(heis_form):
    e = QuasimorphismEngine(heis_form, HBG, TOL)
    ws = words(11, 40, 5)
    q2, rep = lattice_geometric_qm(e, ws, random_pairs(np.random.default_rng(0), [2, 3], 5))
    assert rep.equivalence_distance <= HEISENBERG_COVERING_RADIUS
    assert rep.triangle_bound_ok
    assert all(is_lattice_point(q2(w)) for w in ws)
    assert rep.rounded_defect.max_geometric_defect <= rep.rounded_defect.max_ulam_defect


def test_lattice_values_unchanged():
    # no atoms: every value is the identity, already a lattice point
    e = QuasimorphismEngine(ConnectionForm(heis), HBG)
    q2, _ = lattice_geometric_qm(e, ["a", "ab"], [])
    assert np.array_equal(q2("ab"), heis.identity())


def test_lattice_needs_heisenberg(su2_form):
    with pytest.raises(TypeError):
        lattice_geometric_qm(QuasimorphismEngine(su2_form, HBG), ["a"], [])


# ---------------------------------------------------------------- certificates and epsilon representations


def test_vce_certificates():
    certs = vce_certificates({"x": "acAC", "y": "aacc"})
    assert certs[0]["verdict"] == "not_equivalent"
    with pytest.raises(CertificateError):
        vce_certificates({"x": "a", "y": "aaa"})
    with pytest.warns(UserWarning):
        out = vce_certificates({"x": "ab", "y": "a"})
    assert out[0]["verdict"] == "asserted"


def test_epsilon_rep_build_su2():
    g = su2.exp([0.0, 0.0, 0.45 * 4 * math.pi])
    pairs, family = kazhdan_pairs(np.random.default_rng(0), 1, (2, 3), 4)
    e, rep = epsilon_rep_build(["a", "c"], "acAC", g, 8, su2, pairs, family)
    assert rep.generator_values_distance <= 1e-10
    assert rep.b_power_check <= 1e-6
    assert rep.certificate["obstruction"]
    assert rep.certificate["z3_diameter_exact"] == "1/3"
    assert rep.epsilon_measured > 0


def test_epsilon_rep_rejects_identity():
    with pytest.raises(ValueError):
        epsilon_rep_build(["a", "c"], "acAC", su2.identity(), 4, su2, [])


def test_epsilon_rep_abelian_linear():
    pairs, _ = kazhdan_pairs(np.random.default_rng(1), 1, (2, 3), 4)
    eps = {}
    for m in (2, 4, 8):
        _, rep = epsilon_rep_build(["a", "c"], "acAC", ab.exp([3.0]), m, ab, pairs)
        eps[m] = rep.epsilon_measured
    assert eps[4] == pytest.approx(eps[2] / 2, rel=1e-6)
    assert eps[8] == pytest.approx(eps[2] / 4, rel=1e-6)


@pytest.mark.slow
def test_kazhdan_scaling_su2():
    g = su2.exp([0.0, 0.0, 0.45 * 4 * math.pi])
    pairs, family = kazhdan_pairs(np.random.default_rng(0), 1, (2, 3, 4), 6)
    rep = kazhdan_scaling(["a", "c"], "acAC", g, 8, su2, pairs, family, doublings=2)
    ratios = [r["ratio"] for r in rep.scaling[1:]]
    assert all(0.4 <= q <= 0.6 for q in ratios)


# ---------------------------------------------------------------- Heisenberg lab


def test_lab_small():
    e, rep = nonconstructible_lab(["acAC", "aacc"], LATTICE_GENERATORS, exponent_pairs=((1, 2),), n_max=6)
    assert max(rep.residuals) <= 1e-6
    assert max(rep.trivial_values.values()) <= 1e-9
    assert not rep.centrality[0]["is_central"]
    g = rep.growth[0]
    assert g["exact_linear"] and g["powers_agree"] and g["r2"] >= 0.99


def test_lab_without_tubes():
    e, rep = nonconstructible_lab(["acAC", "aacc"], LATTICE_GENERATORS, exponent_pairs=((1, 2),), n_max=4, tubes=False)
    assert rep.residuals == []
    assert all(np.array_equal(e(w), heis.identity()) for w in ["acAC", "aacc", "a", "acc", "abcd"])
