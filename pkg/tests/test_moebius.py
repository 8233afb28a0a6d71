import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from diractrace.errors import ClassificationError, ContractError, SingularPairError
from diractrace.moebius import (
    GroupElement,
    Point,
    Weight,
    classify_and_length,
    compose,
    factor_j,
    factor_J,
    hyperbolic_distance,
    moebius_act,
    pair_matrices,
    pair_products,
    sigma_invariant,
    translation_length,
)

from conftest import random_element, random_point


class TestGroupElement:
    def test_identity_compose(self):
        g = GroupElement(1.3, 0.2, 0.4, (1 + 0.2 * 0.4) / 1.3)
        assert compose(GroupElement.identity(), g) == g

    def test_negated_compose(self):
        g = GroupElement.boost(0.7)
        ng = compose(-GroupElement.identity(), g)
        assert ng == -g

    def test_boost_rotation_product_matches_direct_multiplication(self):
        # independent oracle: plain 2x2 float multiplication
        got = compose(GroupElement.boost(1.0), GroupElement.rotation(np.pi / 4))
        expect = GroupElement.boost(1.0).matrix @ GroupElement.rotation(np.pi / 4).matrix
        assert np.allclose(got.matrix, expect, atol=1e-15)
        assert np.allclose(
            got.matrix,
            [[1.52321984358566, 0.630938308152666],
             [-0.23210923126632, 0.560361263392831]], atol=1e-12)

    def test_det_renormalized(self):
        g = GroupElement(1.0 + 3e-8, 0.0, 0.0, 1.0)
        assert abs(g.a * g.d - g.b * g.c - 1.0) < 1e-14

    def test_det_reject(self):
        with pytest.raises(ContractError):
            GroupElement(2.0, 0.0, 0.0, 1.0)

    def test_composition_chain_keeps_det(self):
        # long bounded-displacement word: det survives the renormalization
        rng = np.random.default_rng(0)
        g = GroupElement.identity()
        for _ in range(200):
            if rng.random() < 0.5:
                g = g @ GroupElement.boost(rng.uniform(-0.05, 0.05))
            else:
                g = g @ GroupElement.rotation(rng.uniform(-np.pi, np.pi))
        assert abs(g.a * g.d - g.b * g.c - 1.0) < 1e-9


class TestAction:
    def test_identity_action(self):
        z = Point(0.3, 1.4)
        assert moebius_act(GroupElement.identity(), z) == z

    def test_boost_action_on_i(self):
        z = moebius_act(GroupElement.boost(1.3), Point(0.0, 1.0))
        assert abs(z.z - np.exp(1.3) * 1j) < 1e-14

    def test_imag_transform_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            g = random_element(rng)
            z = random_point(rng)
            w = moebius_act(g, z)
            assert abs(w.y - z.y / abs(g.c * z.z + g.d) ** 2) < 1e-13 * w.y

    def test_point_rejects_lower_half(self):
        with pytest.raises(ContractError):
            Point(0.0, -1.0)
        with pytest.raises(ContractError):
            Point(0.0, 0.0)


class TestDistance:
    def test_zero_iff_equal(self):
        z = Point(0.2, 0.9)
        assert hyperbolic_distance(z, z) == 0.0
        assert sigma_invariant(z, z) == 1.0

    def test_imaginary_axis(self):
        for ell in (0.3, 1.0, 2.7):
            d = hyperbolic_distance(Point(0, 1), Point(0, np.exp(ell)))
            assert abs(d - ell) < 1e-13

    def test_geodesic_integration_oracle(self):
        # integrate ds = |dz|/y along the connecting geodesic (a circular
        # arc orthogonal to the real axis) and compare
        z1, z2 = Point(-0.7, 0.8), Point(1.1, 1.9)
        cx = (abs(z2.z) ** 2 - abs(z1.z) ** 2) / (2 * (z2.x - z1.x))
        r = abs(z1.z - cx)
        t1 = np.arctan2(z1.y, z1.x - cx)
        t2 = np.arctan2(z2.y, z2.x - cx)
        val = quad(lambda t: 1.0 / np.sin(t), min(t1, t2), max(t1, t2),
                   epsabs=1e-12, epsrel=1e-12)[0]
        assert abs(val - hyperbolic_distance(z1, z2)) < 1e-8

    def test_sigma_closed_form(self):
        z1, z2 = Point(0, 1), Point(0, np.exp(np.arccosh(3.0)))
        assert abs(sigma_invariant(z1, z2) - 2.0) < 1e-12

    def test_isometry_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            g = random_element(rng)
            z1, z2 = random_point(rng), random_point(rng)
            d0 = hyperbolic_distance(z1, z2)
            d1 = hyperbolic_distance(moebius_act(g, z1), moebius_act(g, z2))
            assert abs(d0 - d1) < 1e-12 * max(1.0, d0)
            assert abs(sigma_invariant(g.act(z1), g.act(z2))
                       - sigma_invariant(z1, z2)) < 1e-12 * sigma_invariant(z1, z2)


class TestClassification:
    def test_bolza_boost_length(self):
        g = GroupElement.boost(2 * np.arccosh(1 + np.sqrt(2)))
        kind, length = classify_and_length(g)
        assert kind == "hyperbolic"
        assert abs(g.trace - 2 * (1 + np.sqrt(2))) < 1e-12
        assert abs(length - 2 * np.arccosh(1 + np.sqrt(2))) < 1e-12

    def test_identity_class(self):
        kind, length = classify_and_length(GroupElement.identity())
        assert kind == "identity" and length is None
        kind2, _ = classify_and_length(-GroupElement.identity())
        assert kind2 == "identity"

    def test_elliptic_rejected(self):
        g = GroupElement.rotation(1.0)  # trace 2 cos(1/2) < 2
        kind, _ = classify_and_length(g)
        assert kind == "elliptic"
        with pytest.raises(ClassificationError):
            translation_length(g)

    def test_near_parabolic_boundary(self):
        g = GroupElement(1.0 + 5e-11, 1.0, 0.0, 1.0 / (1.0 + 5e-11))
        assert classify_and_length(g)[0] == "parabolic"

    def test_power_length_scales(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = GroupElement.boost(rng.uniform(0.5, 2.0))
            h = random_element(rng, allow_sign=False)
            g = h @ g @ h.inverse()
            l1 = translation_length(g)
            gn = g @ g @ g
            assert abs(translation_length(gn) - 3 * l1) < 1e-12 * max(1.0, 3 * l1)


class TestFactorOfAutomorphy:
    def test_identity(self):
        assert factor_j(GroupElement.identity(), Point(0.3, 2.0), 5) == 1.0

    def test_minus_identity(self):
        z = Point(0.1, 1.0)
        for k in (-2, -1, 0, 1, 2, 3):
            val = factor_j(-GroupElement.identity(), z, k)
            assert abs(val - (-1.0) ** k) < 1e-14

    def test_cocycle_dense(self):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(10000):
            g1, g2 = random_element(rng, 3), random_element(rng, 3)
            z = random_point(rng)
            k = int(rng.integers(-4, 5))
            lhs = factor_j(g1 @ g2, z, k)
            rhs = factor_j(g1, g2.act(z), k) * factor_j(g2, z, k)
            worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-12

    def test_sign_flip_rule(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            g = random_element(rng, allow_sign=False)
            z = random_point(rng)
            k = int(rng.integers(-3, 4))
            assert abs(factor_j(-g, z, k) - (-1.0) ** k * factor_j(g, z, k)) < 1e-14

    def test_modulus_one(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            val = factor_j(random_element(rng), random_point(rng), int(rng.integers(-5, 6)))
            assert abs(abs(val) - 1.0) < 1e-14

    def test_spinor_factor(self):
        z = Point(0.4, 1.2)
        J = factor_J(-GroupElement.identity(), z, 1)
        assert np.allclose(J, -np.eye(2))
        rng = np.random.default_rng(7)
        for _ in range(100):
            g1, g2 = random_element(rng, 3), random_element(rng, 3)
            k = int(rng.integers(-3, 4))
            lhs = factor_J(g1 @ g2, z, k)
            rhs = factor_J(g1, g2.act(z), k) @ factor_J(g2, z, k)
            assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_weight_type(self):
        assert factor_j(GroupElement.boost(1.0), Point(0, 1), Weight(2)) \
            == factor_j(GroupElement.boost(1.0), Point(0, 1), 2)
        with pytest.raises(ContractError):
            Weight(1.5)


class TestPairProducts:
    def test_unit_modulus(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            z1, z2 = random_point(rng), random_point(rng)
            for p in pair_products(z1, z2):
                assert abs(abs(p) - 1.0) < 1e-12

    def test_product_consistency(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            z1, z2 = random_point(rng), random_point(rng)
            p11, p12, p21, p22 = pair_products(z1, z2)
            assert abs(p11 * p22 - 1.0) < 1e-12
            assert abs(p12 * p21 - 1.0) < 1e-12

    def test_squares_match_ratios(self):
        # the off-diagonal products are global square roots of the
        # half-power ratios; their squares must equal those exactly
        rng = np.random.default_rng(10)
        for _ in range(100):
            z1, z2 = random_point(rng), random_point(rng)
            p11, p12, p21, p22 = pair_products(z1, z2)
            r = z2.z - np.conj(z1.z)
            q = z1.z - np.conj(z2.z)
            p = z1.z - z2.z
            assert abs(p11 ** 2 - r / q) < 1e-12
            assert abs(p12 ** 2 - np.conj(p) / (-p)) < 1e-12

    def test_equivariance_all_four(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            g = random_element(rng)
            z1, z2 = random_point(rng), random_point(rng)
            if abs(z1.z - z2.z) < 1e-4:
                continue
            th1 = np.angle(g.c * z1.z + g.d)
            th2 = np.angle(g.c * z2.z + g.d)
            P = pair_products(z1, z2)
            Pg = pair_products(g.act(z1), g.act(z2))
            mults = (np.exp(1j * (th1 - th2)), np.exp(1j * (th1 + th2)),
                     np.exp(-1j * (th1 + th2)), np.exp(-1j * (th1 - th2)))
            for a, b, mlt in zip(Pg, P, mults):
                assert abs(a - mlt * b) < 1e-11

    def test_canonical_on_imaginary_axis(self):
        P = pair_products(Point(0.0, 3.0), Point(0.0, 1.0))
        for p in P:
            assert abs(p - 1.0) < 1e-14

    def test_coincident_rejected(self):
        z = Point(0.1, 1.1)
        with pytest.raises(SingularPairError):
            pair_products(z, z)
        with pytest.raises(SingularPairError):
            pair_matrices(z, z)

    def test_pair_matrices_factorization(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            z1, z2 = random_point(rng), random_point(rng)
            A, B = pair_matrices(z1, z2)
            P = pair_products(z1, z2)
            assert abs(A[0, 0] * B[0, 0] - P[0]) < 1e-13
            assert abs(A[0, 0] * B[1, 1] - P[1]) < 1e-13
            assert abs(A[1, 1] * B[0, 0] - P[2]) < 1e-13
            assert abs(A[1, 1] * B[1, 1] - P[3]) < 1e-13
            assert abs(abs(A[0, 0] * B[0, 0]) - 1.0) < 1e-12


@given(x1=st.floats(-3, 3), y1=st.floats(0.05, 5), x2=st.floats(-3, 3),
       y2=st.floats(0.05, 5))
@settings(max_examples=150, deadline=None)
def test_sigma_symmetric_and_bounded(x1, y1, x2, y2):
    z1, z2 = Point(x1, y1), Point(x2, y2)
    s12 = sigma_invariant(z1, z2)
    s21 = sigma_invariant(z2, z1)
    assert s12 >= 1.0
    assert abs(s12 - s21) <= 1e-12 * s12
