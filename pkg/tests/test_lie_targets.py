import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holoqm.lie_targets import (
    HEISENBERG_COVERING_RADIUS,
    LATTICE_GENERATORS,
    Abelian,
    Heisenberg,
    SU2,
    TargetMismatch,
    bch2,
    central_projection,
    get_target,
    is_lattice_point,
    lattice_points_in_ball,
    lattice_round,
    su2_cyclic_subgroup_diameter,
    su2_cyclic_subgroup_diameter_exact,
)

su2, heis, ab = SU2(), Heisenberg(), Abelian(2)
coords = st.floats(-3.0, 3.0)
vec3 = st.tuples(coords, coords, coords).map(np.array)
small3 = st.tuples(*[st.floats(-1.0, 1.0)] * 3).map(np.array)


def random_su2(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[w + 1j * z, 1j * x + y], [1j * x - y, w - 1j * z]])


def random_heis(rng, scale=5.0):
    return heis.element(*rng.uniform(-scale, scale, 3))


# ---------------------------------------------------------------- exp / log


@pytest.mark.parametrize("target", [su2, heis, ab], ids=lambda t: t.name)
def test_exp_zero_is_identity(target):
    assert np.array_equal(target.exp(np.zeros(target.dim)), target.identity())


def test_heisenberg_exp_basis():
    g = heis.exp([1.0, 0.0, 0.0])
    assert np.array_equal(g, np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def test_su2_order_facts():
    # norm 2 pi / 3 about sigma_3: the cube is -1 (order 6); norm 4 pi / 3 gives order 3
    g = su2.exp([0.0, 0.0, 2 * math.pi / 3])
    assert np.max(np.abs(np.linalg.matrix_power(g, 3) + np.eye(2))) < 1e-12
    assert np.max(np.abs(np.linalg.matrix_power(g, 6) - np.eye(2))) < 1e-12
    h = su2.exp([0.0, 0.0, 4 * math.pi / 3])
    assert np.max(np.abs(np.linalg.matrix_power(h, 3) - np.eye(2))) < 1e-12
    assert su2.distance(su2.identity(), h) == pytest.approx(1 / 3, abs=1e-15)


def test_su2_exp_log_roundtrip(rng):
    for _ in range(1000):
        u = rng.normal(size=3)
        u *= rng.uniform(0, 0.99 * 2 * math.pi) / np.linalg.norm(u)
        assert np.max(np.abs(su2.log(su2.exp(u)) - u)) < 1e-10


@given(vec3)
def test_heisenberg_exp_log_roundtrip(u):
    assert np.max(np.abs(heis.log(heis.exp(u)) - u)) < 1e-12


def test_heisenberg_roundtrip_bulk(rng):
    for _ in range(1000):
        u = rng.uniform(-50, 50, 3)
        assert np.max(np.abs(heis.log(heis.exp(u)) - u)) < 1e-10 * max(1.0, np.max(np.abs(u)) ** 2)


def test_su2_exp_unitary(rng):
    for _ in range(100):
        g = su2.exp(rng.normal(size=3) * 3)
        assert np.max(np.abs(g @ g.conj().T - np.eye(2))) < 1e-12
        assert abs(np.linalg.det(g) - 1) < 1e-12


def test_su2_products_reprojected(rng):
    g = su2.identity()
    for _ in range(10_000):
        g = su2.mul(g, su2.exp(rng.normal(size=3)))
    assert np.max(np.abs(g @ g.conj().T - np.eye(2))) < 1e-12
    assert abs(np.linalg.det(g) - 1) < 1e-12


def test_heisenberg_products_unitriangular(rng):
    g = heis.identity()
    for _ in range(1000):
        g = heis.mul(g, random_heis(rng))
    heis.check(g)
    assert np.all(np.diag(g) == 1.0) and np.all(np.tril(g, -1) == 0.0)


# ---------------------------------------------------------------- distances


def test_distance_examples():
    assert su2.distance(su2.identity(), su2.identity()) == 0.0
    assert su2.distance(su2.identity(), -su2.identity()) == pytest.approx(0.5, abs=1e-15)
    assert heis.distance(heis.identity(), heis.identity()) == 0.0
    assert ab.distance(np.array([1.0, 2.0]), np.array([4.0, 6.0])) == 5.0


def test_su2_distance_formula(rng):
    for _ in range(100):
        g, h = random_su2(rng), random_su2(rng)
        tr = 0.5 * np.trace(g.conj().T @ h).real
        assert su2.distance(g, h) == pytest.approx(math.acos(max(-1, min(1, tr))) / (2 * math.pi), abs=1e-9)


def test_su2_diameter(rng):
    d = max(su2.distance(random_su2(rng), random_su2(rng)) for _ in range(2000))
    assert d <= 0.5


def test_left_and_bi_invariance(rng):
    for _ in range(1000):
        g, h1, h2 = random_su2(rng), random_su2(rng), random_su2(rng)
        d = su2.distance(h1, h2)
        assert abs(su2.distance(g @ h1, g @ h2) - d) < 1e-10
        assert abs(su2.distance(h1 @ g, h2 @ g) - d) < 1e-10
        g, h1, h2 = random_heis(rng), random_heis(rng), random_heis(rng)
        assert abs(heis.distance(heis.mul(g, h1), heis.mul(g, h2)) - heis.distance(h1, h2)) < 1e-10 * (
            1 + np.max(np.abs(g)) ** 2
        )


def test_heisenberg_gauge_formula():
    g = heis.exp([0.5, -2.0, 9.0])
    assert heis.distance(heis.identity(), g) == pytest.approx(3.0)
    assert heis.distance(heis.identity(), heis.exp([-4.0, 0.1, 1.0])) == pytest.approx(4.0)


def test_target_mismatch():
    rec = su2.to_record(su2.identity())
    with pytest.raises(TargetMismatch):
        heis.from_record(rec)
    assert np.array_equal(su2.from_record(rec), su2.identity())
    g = heis.exp([1.0, 2.0, 3.0])
    assert np.array_equal(heis.from_record(heis.to_record(g)), g)


def test_get_target():
    assert get_target("su2") == su2
    assert get_target("abelian3").dim == 3
    with pytest.raises(ValueError):
        get_target("so3")


# ---------------------------------------------------------------- subgroup calibration


@pytest.mark.parametrize("k", range(2, 25))
def test_cyclic_subgroup_diameter(k):
    d = su2_cyclic_subgroup_diameter(k)
    exact = su2_cyclic_subgroup_diameter_exact(k)
    assert d == pytest.approx(float(exact), abs=1e-12)
    assert exact >= Fraction(1, 3)


def test_z3_diameter_exact():
    assert su2_cyclic_subgroup_diameter_exact(3) == Fraction(1, 3)
    assert su2_cyclic_subgroup_diameter_exact(2) == Fraction(1, 2)


# ---------------------------------------------------------------- BCH


def test_bch2_examples():
    u = np.array([1.0, 0.0, 0.0])
    assert np.array_equal(bch2(heis, u, np.zeros(3)), u)
    assert np.array_equal(bch2(heis, u, np.array([0.0, 1.0, 0.0])), np.array([1.0, 1.0, 0.5]))
    assert np.array_equal(bch2(ab, np.array([1.0, 2.0]), np.array([3.0, -1.0])), np.array([4.0, 1.0]))
    with pytest.raises(TypeError):
        bch2(su2, u, u)


@given(vec3, vec3)
def test_bch2_exact(u, v):
    lhs = heis.exp(bch2(heis, u, v))
    rhs = heis.mul(heis.exp(u), heis.exp(v))
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + np.max(np.abs(u)) + np.max(np.abs(v))) ** 2


# ---------------------------------------------------------------- vectorized kernels


@pytest.mark.parametrize("target", [su2, heis, Abelian(3)], ids=lambda t: t.name)
def test_exp_product_and_brackets_match_loops(target, rng):
    om = rng.normal(size=(40, 3)) * 0.7
    loop = target.identity()
    for w in om:
        loop = target.mul(loop, target.exp(w))
    assert np.max(np.abs(target.exp_product(om) - loop)) < 1e-12
    u, v = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    many = target.bracket_many(u, v)
    assert np.allclose(many, [target.bracket(a, b) for a, b in zip(u, v)], atol=0)


def test_su2_bracket_matches_matrices(rng):
    for _ in range(20):
        u, v = rng.normal(size=3), rng.normal(size=3)
        comm = su2.hat(u) @ su2.hat(v) - su2.hat(v) @ su2.hat(u)
        assert np.allclose(comm, su2.hat(su2.bracket(u, v)), atol=1e-13)


def test_heisenberg_bracket_matches_matrices(rng):
    def hat(u):
        return np.array([[0, u[0], u[2]], [0, 0, u[1]], [0, 0, 0]])

    for _ in range(20):
        u, v = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(hat(u) @ hat(v) - hat(v) @ hat(u), hat(heis.bracket(u, v)), atol=1e-13)


# ---------------------------------------------------------------- lattice


def test_lattice_round_examples():
    g = heis.element(2.0, -3.0, 7.0)
    assert np.array_equal(lattice_round(g), g)
    assert np.array_equal(lattice_round(heis.element(0.4, 0.4, 0.4)), heis.identity())
    assert all(is_lattice_point(x) for x in LATTICE_GENERATORS)


def test_lattice_round_within_covering_radius(rng):
    for _ in range(1000):
        g = random_heis(rng, 100.0)
        r = lattice_round(g)
        assert is_lattice_point(r)
        heis.check(r)
        assert heis.distance(g, r) <= HEISENBERG_COVERING_RADIUS + 1e-9


def test_lattice_round_half_to_even():
    r = lattice_round(heis.element(0.5, 1.5, 0.0))
    assert (r[0, 1], r[1, 2]) == (0.0, 2.0)


def test_lattice_generators_stay_integer(rng):
    g = heis.identity()
    for _ in range(500):
        g = heis.mul(g, heis.inv(LATTICE_GENERATORS[rng.integers(2)]) if rng.integers(2) else LATTICE_GENERATORS[rng.integers(2)])
        assert is_lattice_point(g)


@pytest.mark.parametrize("radius", [1.0, 2.0, 3.0, 4.0])
def test_gauge_balls_finite(radius):
    pts = lattice_points_in_ball(radius)
    r = int(radius)
    # abelian part bounded by the radius; centre bounded by radius^2 + |xy| / 2
    assert all(abs(x) <= r and abs(y) <= r and abs(z - x * y / 2) <= radius**2 for x, y, z in pts)
    assert (0, 0, 0) in pts
    # brute-force count over a larger box agrees
    box = range(-2 * r - 2, 2 * r + 3)
    zbox = range(-3 * r * r - 3, 3 * r * r + 4)
    brute = [
        (x, y, z) for x in box for y in box for z in zbox if heis.gauge(heis.log(heis.element(x, y, z))) <= radius
    ]
    assert sorted(brute) == sorted(pts)


# ---------------------------------------------------------------- projection and centrality


def test_central_projection(rng):
    assert np.array_equal(central_projection(heis.identity()), [0.0, 0.0])
    assert np.array_equal(central_projection(heis.exp([0.0, 0.0, 3.0])), [0.0, 0.0])
    g = heis.element(1.0, 2.0, 3.0)
    for n in range(-5, 9):
        assert np.array_equal(central_projection(heis.power(g, n)), n * central_projection(g))
    for _ in range(100):
        g, h = heis.element(*rng.integers(-9, 9, 3)), heis.element(*rng.integers(-9, 9, 3))
        assert np.array_equal(central_projection(heis.mul(g, h)), central_projection(g) + central_projection(h))


def test_is_central():
    assert su2.is_central(su2.identity())
    assert su2.is_central(-su2.identity())
    assert not su2.is_central(su2.exp([0.3, 0.0, 0.0]))
    assert heis.is_central(heis.identity())
    assert heis.is_central(heis.exp([0.0, 0.0, 5.0]))
    assert not heis.is_central(heis.exp([1.0, 0.0, 0.0]))
    assert ab.is_central(np.array([3.0, 1.0]))
