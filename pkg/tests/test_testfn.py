import numpy as np
import pytest
from scipy.integrate import quad

from diractrace.errors import AdmissibilityError, ContractError
from diractrace.testfn import (
    TestFunction,
    fourier_g,
    hs_eigenvalue,
    validate_admissible,
)


def quad_transform(h, u):
    """Direct quadrature oracle for g(u) = (1/2pi) Int h e^{-i rho u}."""
    val = quad(lambda r: float(np.real(h(r) * np.exp(-1j * r * u))),
               -np.inf, np.inf, limit=600, epsabs=1e-13, epsrel=1e-12)[0]
    return val / (2.0 * np.pi)


class TestAdmissibility:
    def test_gaussian(self):
        rep = validate_admissible(TestFunction.gaussian(1.0))
        assert rep.ok and rep.beta_certified >= 1.0

    def test_resolvent_beta_capped_by_poles(self):
        h = TestFunction.resolvent_difference(2.0, 3.0)
        rep = validate_admissible(h)
        assert rep.ok
        assert rep.beta_certified < 1.5
        assert rep.beta_certified > 1.49

    def test_peaked(self):
        rep = validate_admissible(TestFunction.peaked_pair(2.0, 0.1))
        assert rep.ok

    def test_odd_perturbation_fails(self):
        h = TestFunction.gaussian(1.0)
        bad = TestFunction("gaussian", h.params, h.beta, h.delta)
        # evenness control: wrap with an odd term
        class Odd(TestFunction):
            def __call__(self, rho):
                rho = np.asarray(rho, dtype=complex)
                out = np.exp(-rho * rho) + rho * np.exp(-rho * rho)
                return complex(out) if out.ndim == 0 else out
        odd = Odd("gaussian", (1.0,), 1.0, 2.0)
        rep = validate_admissible(odd)
        assert not rep.ok
        assert any("evenness" in f for f in rep.failures)
        del bad

    def test_narrow_strip_fails(self):
        h = TestFunction("gaussian", (1.0,), 0.3, 2.0)
        rep = validate_admissible(h)
        assert not rep.ok

    def test_constructor_validation(self):
        with pytest.raises(ContractError):
            TestFunction.gaussian(-1.0)
        with pytest.raises(ContractError):
            TestFunction.peaked_pair(1.0, 0.0)
        with pytest.raises(ContractError):
            TestFunction.resolvent_difference(0.9, 3.0)


class TestFourierPair:
    def test_gaussian_g0(self):
        pair = fourier_g(TestFunction.gaussian(1.0))
        assert abs(pair.g(0.0) - 1.0 / (2.0 * np.sqrt(np.pi))) < 1e-14

    def test_resolvent_g0(self):
        pair = fourier_g(TestFunction.resolvent_difference(2.0, 3.0))
        assert abs(pair.g(0.0) - (1.0 / 3.0 - 1.0 / 5.0)) < 1e-14

    def test_quadrature_oracle_all_families(self):
        rng = np.random.default_rng(1)
        for h in (TestFunction.gaussian(0.7),
                  TestFunction.peaked_pair(1.3, 0.4),
                  TestFunction.resolvent_difference(2.0, 3.0)):
            pair = fourier_g(h)
            for u in rng.uniform(0.0, 4.0, 4):
                assert abs(pair.g(u) - quad_transform(h, u)) < 1e-10

    def test_evenness(self):
        rng = np.random.default_rng(2)
        for h in (TestFunction.gaussian(1.0), TestFunction.peaked_pair(2.0, 0.1),
                  TestFunction.resolvent_difference(1.8, 2.6)):
            pair = fourier_g(h)
            for u in rng.uniform(0.0, 8.0, 10):
                assert abs(pair.g(u) - pair.g(-u)) < 1e-14

    def test_envelope_dominates(self):
        for h in (TestFunction.gaussian(1.0), TestFunction.peaked_pair(2.0, 0.1),
                  TestFunction.resolvent_difference(2.0, 3.0)):
            pair = fourier_g(h)
            u = np.linspace(0.0, 20.0, 100)
            assert np.all(np.abs(pair.g(u)) <= pair.g_envelope(u) + 1e-15)

    def test_resolvent_family_definition_consistency(self):
        h = TestFunction.resolvent_difference(2.0, 3.0)
        rho = np.linspace(0, 5, 40)
        direct = 1.0 / (rho ** 2 + 1.5 ** 2) - 1.0 / (rho ** 2 + 2.5 ** 2)
        assert np.max(np.abs(h(rho) - direct)) < 1e-14


class TestHSEigenvalue:
    def test_functional_identity(self):
        h = TestFunction.gaussian(1.0)
        for rho in (0.0, 0.7, 2.0):
            lhs = hs_eigenvalue(h, rho) + hs_eigenvalue(h, -rho)
            assert abs(lhs - 2.0 * h(rho)) < 1e-9

    def test_at_zero_equals_h(self):
        h = TestFunction.gaussian(1.0)
        assert abs(hs_eigenvalue(h, 0.0) - h(0.0)) < 1e-10

    def test_contour_independence(self):
        h = TestFunction.gaussian(1.0)
        a = hs_eigenvalue(h, 1.0, beta=0.6)
        b = hs_eigenvalue(h, 1.0, beta=0.9)
        assert abs(a - b) < 1e-9

    def test_resolvent_family(self):
        h = TestFunction.resolvent_difference(2.0, 3.0)
        for rho in (0.5, 1.5):
            lhs = hs_eigenvalue(h, rho, beta=0.9) + hs_eigenvalue(h, -rho, beta=0.9)
            assert abs(lhs - 2.0 * h(rho)) < 1e-9

    def test_contour_outside_strip_rejected(self):
        h = TestFunction.resolvent_difference(2.0, 3.0)
        with pytest.raises(AdmissibilityError):
            hs_eigenvalue(h, 0.5, beta=2.0)
