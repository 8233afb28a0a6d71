"""Admissible test functions, their Fourier transforms, and Lambda(rho).

Three families cover everything the trace identities need: a gaussian,
a symmetric pair of gaussian peaks (the scanner probe), and a difference
of resolvent kernels (the zeta-function probe).  All are even; the
resolvent family is the only one with poles, which cap its analyticity
strip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import AdmissibilityError, ContractError, QuadratureError

__all__ = [
    "TestFunction",
    "FourierPair",
    "AdmissibilityReport",
    "validate_admissible",
    "fourier_g",
    "hs_eigenvalue",
]

_SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class TestFunction:
    """Even test function h(rho), analytic on |Im rho| <= beta.

    beta is the certified strip half-width (for pole-bearing families it
    sits 1e-3 inside the nearest pole); delta the certified polynomial
    decay margin beyond rho^-2.
    """

    family: str
    params: tuple[float, ...]
    beta: float
    delta: float

    # -- constructors ---------------------------------------------------

    @classmethod
    def gaussian(cls, t: float, beta: float = 1.0) -> "TestFunction":
        if t <= 0:
            raise ContractError("gaussian width t must be positive")
        return cls("gaussian", (float(t),), beta, 2.0)

    @classmethod
    def peaked_pair(cls, a: float, eps: float = 0.05, beta: float = 1.0) -> "TestFunction":
        if eps <= 0 or a < 0:
            raise ContractError("peaked pair needs a >= 0 and eps > 0")
        return cls("peaked_pair", (float(a), float(eps)), beta, 2.0)

    @classmethod
    def resolvent_difference(cls, s: float, sigma: float) -> "TestFunction":
        if not (s > 1 and sigma > 1):
            raise ContractError("resolvent family needs Re s, Re sigma > 1")
        beta = min(s, sigma) - 0.5 - 1e-3  # poles at +-i(s-1/2), +-i(sigma-1/2)
        return cls("resolvent_difference", (float(s), float(sigma)), beta, 2.0)

    # -- evaluation -------------------------------------------------------

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if self.family == "gaussian":
            (t,) = self.params
            out = np.exp(-t * rho * rho)
        elif self.family == "peaked_pair":
            a, eps = self.params
            out = np.exp(-((rho - a) / eps) ** 2) + np.exp(-((rho + a) / eps) ** 2)
        elif self.family == "resolvent_difference":
            s, sg = self.params
            out = 1.0 / (rho * rho + (s - 0.5) ** 2) - 1.0 / (rho * rho + (sg - 0.5) ** 2)
        else:
            raise ContractError(f"unknown test-function family {self.family!r}")
        return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FourierPair:
    """h together with g(u) = (1/2pi) Int h(rho) e^{-i rho u} drho."""

    h: TestFunction

    def g(self, u):
        u = np.asarray(u, dtype=float)
        h = self.h
        if h.family == "gaussian":
            (t,) = h.params
            out = np.exp(-u * u / (4.0 * t)) / (2.0 * np.sqrt(np.pi * t))
        elif h.family == "peaked_pair":
            a, eps = h.params
            out = (eps / (2.0 * _SQRT_PI)) * np.exp(-(eps * u) ** 2 / 4.0) * 2.0 * np.cos(a * u)
        elif h.family == "resolvent_difference":
            s, sg = h.params
            au = np.abs(u)
            out = np.exp(-(s - 0.5) * au) / (2.0 * s - 1.0) \
                - np.exp(-(sg - 0.5) * au) / (2.0 * sg - 1.0)
        else:
            raise ContractError(f"unknown test-function family {h.family!r}")
        return float(out) if out.ndim == 0 else out

    def g_envelope(self, u):
        """Even decreasing envelope of |g|, used by truncation tails."""
        u = np.abs(np.asarray(u, dtype=float))
        h = self.h
        if h.family == "gaussian":
            return self.g(u)
        if h.family == "peaked_pair":
            a, eps = h.params
            return (eps / _SQRT_PI) * np.exp(-(eps * u) ** 2 / 4.0)
        s, sg = h.params
        return np.exp(-(s - 0.5) * u) / (2.0 * s - 1.0) \
            + np.exp(-(sg - 0.5) * u) / (2.0 * sg - 1.0)

    def log_g_envelope(self, u):
        """log of the envelope, safe where the envelope underflows."""
        u = np.abs(np.asarray(u, dtype=float))
        h = self.h
        if h.family == "gaussian":
            (t,) = h.params
            return -u * u / (4.0 * t) - np.log(2.0 * np.sqrt(np.pi * t))
        if h.family == "peaked_pair":
            a, eps = h.params
            return -(eps * u) ** 2 / 4.0 + np.log(eps / _SQRT_PI)
        s, sg = h.params
        lo = np.minimum((s - 0.5) * u + np.log(2.0 * s - 1.0),
                        (sg - 0.5) * u + np.log(2.0 * sg - 1.0))
        return np.log1p(np.exp(-np.abs((s - sg) * u
                        + np.log((2.0 * s - 1.0) / (2.0 * sg - 1.0))))) - lo


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    beta_certified: float
    decay_constant: float
    failures: tuple[str, ...] = ()


def validate_admissible(h: TestFunction, n_samples: int = 60) -> AdmissibilityReport:
    """Sample the admissibility clauses: evenness and the strip decay bound.

    Checks h(rho) = h(-rho) at sampled strip points and fits the constant
    C in |h| <= C (1 + Re rho)^{-2-delta} on |Im rho| <= beta; reports the
    certified beta.  Failures name the violated clause.
    """
    failures = []
    rng = np.random.default_rng(7)
    re = rng.uniform(0.0, 12.0, n_samples)
    im = rng.uniform(-h.beta, h.beta, n_samples)
    pts = re + 1j * im
    even_dev = np.max(np.abs(h(pts) - h(-pts)))
    if even_dev > 1e-12:
        failures.append(f"evenness violated: max deviation {even_dev:.3e}")
    if h.beta < 0.5 + 1e-6:
        failures.append(f"strip half-width beta = {h.beta} below 1/2")
    weight = (1.0 + np.abs(pts.real)) ** (2.0 + h.delta)
    c_fit = float(np.max(np.abs(h(pts)) * weight))
    far = 30.0 + 1j * rng.uniform(-h.beta, h.beta, 8)
    far_dev = np.abs(h(far)) * (1.0 + far.real) ** (2.0 + h.delta)
    if np.any(far_dev > 4.0 * c_fit + 1e-12):
        failures.append("decay bound not uniform far out on the strip")
    return AdmissibilityReport(not failures, h.beta, c_fit, tuple(failures))


def fourier_g(h: TestFunction) -> FourierPair:
    """Closed-form Fourier pair; requires an admissible h."""
    report = validate_admissible(h)
    if not report.ok:
        raise AdmissibilityError("; ".join(report.failures))
    return FourierPair(h)


def hs_eigenvalue(h: TestFunction, rho: float, beta: float | None = None) -> complex:
    """Hilbert-Schmidt eigenvalue Lambda(rho) by contour quadrature.

    Lambda(rho) = (1/pi i) Int_{Im rho' = -beta} h(rho')/(rho' - rho) drho',
    the normalization forced by the functional identity
    Lambda(rho) + Lambda(-rho) = 2 h(rho) (for real rho above the contour)
    and by the trace of the associated operator being 2 sum h(rho_n).
    """
    if beta is None:
        beta = min(h.beta, 0.9)
    if beta <= 0 or beta > h.beta:
        raise AdmissibilityError(f"contour height {beta} outside certified strip {h.beta}")
    rho = complex(rho)
    if rho.imag <= -beta:
        raise ContractError("rho must lie above the contour")

    def f(x):
        rp = x - 1j * beta
        return h(rp) / (rp - rho)

    cut = max(5.0, 3.0 * abs(rho.real) + 5.0)
    pieces = [(-np.inf, -cut), (-cut, cut), (cut, np.inf)]
    val = 0.0 + 0.0j
    for lo, hi in pieces:
        re, re_err = quad(lambda x: f(x).real, lo, hi, limit=600, epsabs=1e-13, epsrel=1e-12)
        im, im_err = quad(lambda x: f(x).imag, lo, hi, limit=600, epsabs=1e-13, epsrel=1e-12)
        if max(re_err, im_err) > 1e-8:
            raise QuadratureError("Lambda contour quadrature did not converge")
        val += re + 1j * im
    return val / (1j * np.pi)
