"""Selberg zeta function for the weight-one system.

Euler product over primitive classes Z(s) = prod_p prod_{k>=0}
(1 - chi(gamma_p) e^{-l_p (k+s)}) for Re s > 1, its logarithmic
derivative, the resolvent-trace consistency identity, and the
entire-function product representation with config-supplied constants
(zero-mode count N, generalized Euler constant gamma_D, leading Taylor
coefficient at s = 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, ContractError, DomainError, TailBoundError
from .fuchsian import LengthSpectrum
from .specfun import digamma, log_barnes_g
from .testfn import TestFunction
from .traceformula import geometric_term, identity_term, _growth_constant

__all__ = [
    "ZetaEvaluation",
    "log_zeta_euler",
    "zeta_log_deriv",
    "resolvent_consistency",
    "zeta_product_rep",
]

_PI = np.pi
_DOMAIN_MARGIN = 0.05


@dataclass(frozen=True)
class ZetaEvaluation:
    s: complex
    log_z: complex
    tail: float
    fingerprint: str

    @property
    def value(self) -> complex:
        return complex(np.exp(self.log_z))


def _require_domain(s: complex, margin: float = _DOMAIN_MARGIN) -> complex:
    s = complex(s)
    if s.real <= 1.0 + margin:
        raise DomainError(f"Euler product needs Re s > 1 + {margin}, got {s}")
    return s


def _euler_tail(spectrum: LengthSpectrum, s: complex) -> float:
    """Bound on the dropped primitive classes beyond the cutoff.

    |log(1 - chi e^{-l(k+s)})| summed over k is at most
    2 e^{-l Re s}/(1 - e^{-l}); integrate the fitted class growth.
    """
    c_fit = _growth_constant(spectrum)
    L = spectrum.cutoff
    re = s.real

    def integrand(u):
        # combined exponent e^{u(1-Re s)} decays for Re s > 1
        return c_fit * 2.0 * np.exp(u * (1.0 - re)) / (u * (1.0 - np.exp(-u)))

    return float(quad(integrand, L, np.inf, limit=200)[0])


def log_zeta_euler(s, spectrum: LengthSpectrum, tol: float | None = None) -> ZetaEvaluation:
    """log Z(s) from the Euler product over enumerated primitive classes.

    The k-product is summed until e^{-l(k + Re s)} < 1e-18 (machine-exact
    geometric tail); the p-sum is truncated at the spectrum cutoff with a
    growth-fitted tail bound.
    """
    s = _require_domain(s)
    total = 0.0 + 0.0j
    for rec in spectrum.primitive_records():
        l = rec.primitive_length
        kmax = max(1, int(np.ceil((np.log(1e18) / l) - s.real)) + 1)
        k = np.arange(kmax + 1)
        q = rec.chi_value * np.exp(-l * (k + s))
        total += rec.multiplicity * np.sum(np.log1p(-q))
    tail = _euler_tail(spectrum, s)
    if tol is not None and tail > tol:
        raise TailBoundError(f"Euler-product tail {tail:.3e} exceeds {tol:.3e}; raise L")
    return ZetaEvaluation(s, complex(total), tail, spectrum.group_fingerprint)


def zeta_log_deriv(s, spectrum: LengthSpectrum, tol: float | None = None,
                   max_total_length: float | None = None) -> complex:
    """Z'(s)/Z(s) = sum_p sum_n chi^n l e^{-n l s} / (1 - e^{-n l}).

    Same truncation and tail policy as the Euler product; the n-sum is
    carried until its geometric bound drops below 1e-18.  With
    max_total_length the n-sum is instead capped at n l <= that value,
    which makes the sum class-for-class identical to the geodesic-side
    sum of the trace identity (used by the shared-truncation check).
    """
    s = _require_domain(s)
    total = 0.0 + 0.0j
    for rec in spectrum.primitive_records():
        l = rec.primitive_length
        if max_total_length is None:
            nmax = max(1, int(np.ceil(np.log(1e18) / (l * s.real))) + 1)
        else:
            nmax = int(np.floor(max_total_length / l + 1e-12))
            if nmax < 1:
                continue
        n = np.arange(1, nmax + 1)
        chin = np.where(n % 2 == 0, 1.0, float(rec.chi_value))
        total += rec.multiplicity * np.sum(
            chin * l * np.exp(-n * l * s) / (1.0 - np.exp(-n * l)))
    tail = _euler_tail(spectrum, s)
    if tol is not None and tail > tol:
        raise TailBoundError(f"log-derivative tail {tail:.3e} exceeds {tol:.3e}; raise L")
    return complex(total)


@dataclass(frozen=True)
class ResolventReport:
    geometric_residual: float
    identity_residual: float
    geometric_value: float
    identity_value: float


def resolvent_consistency(s: float, sigma: float, spectrum: LengthSpectrum,
                          area: float) -> ResolventReport:
    """Residuals of the two halves of the resolvent-trace identity.

    (a) geometric: the geodesic sum for the resolvent-difference test
        function against (2s-1)^{-1} Z'/Z(s) - (2 sigma-1)^{-1} Z'/Z(sigma),
        evaluated over the same spectrum;
    (b) identity: the coth integral against its digamma closed form.
    Residuals are reported even when large.
    """
    if not (s > 1.0 and sigma > 1.0):
        raise DomainError("resolvent consistency needs s, sigma > 1")
    h = TestFunction.resolvent_difference(s, sigma)
    geo, _, _ = geometric_term(h, spectrum)
    zeta_side = (zeta_log_deriv(s, spectrum) / (2.0 * s - 1.0)
                 - zeta_log_deriv(sigma, spectrum) / (2.0 * sigma - 1.0)).real
    ident = identity_term(h, area)
    closed = (-area / (2.0 * _PI) * (digamma(s - 0.5) - digamma(sigma - 0.5))
              + area / (4.0 * _PI) * (1.0 / (sigma - 0.5) - 1.0 / (s - 0.5))).real
    return ResolventReport(
        geometric_residual=abs(geo - zeta_side),
        identity_residual=abs(ident - closed),
        geometric_value=geo,
        identity_value=ident,
    )


def zeta_product_rep(s, eigenvalues, n_zero: int, gamma_d: float,
                     z2n_coefficient: float, area: float,
                     m_start: int | None = None):
    """Entire-function product representation of Z(s).

    Needs the config-supplied constants: n_zero = N (half the zero-mode
    count), gamma_d the generalized Euler constant, z2n_coefficient the
    Taylor coefficient Z^(2N)(1/2)/(2N)!.  eigenvalues is the sorted
    non-negative list including the N zero modes; the product runs from
    index m_start (default N, skipping them).  Returns (value, log_tail)
    where log_tail is the magnitude of the last included log factor.
    """
    for name, val in (("n_zero", n_zero), ("gamma_d", gamma_d),
                      ("z2n_coefficient", z2n_coefficient)):
        if val is None:
            raise ConfigError(f"zeta_product_rep needs the constant {name!r}")
    s = complex(s)
    x = s - 0.5
    genus_factor = area / (2.0 * _PI)
    if abs(genus_factor - round(genus_factor.real)) > 1e-8:
        raise ContractError("area/2pi must be the integer 2(g-1)")
    if m_start is None:
        m_start = n_zero

    rhos = np.asarray(sorted(eigenvalues), dtype=float)[m_start:]
    if np.any(rhos <= 0.0):
        raise ContractError("eigenvalue product needs strictly positive rho_m")
    factors = 1.0 + x * x / rhos ** 2
    log_tail = float(abs(np.log1p(x * x / rhos[-1] ** 2) - x * x / rhos[-1] ** 2)) \
        if len(rhos) else 0.0
    if (n_zero > 0 and x == 0) or np.any(factors == 0.0):
        return 0.0 + 0.0j, log_tail  # exact zero of the representation

    log_val = np.log(complex(z2n_coefficient)) + 2.0 * n_zero * np.log(x) \
        + x * x * gamma_d + x * genus_factor
    bracket = -x * np.log(2.0 * _PI) + (s * s - 0.25) + 2.0 * log_barnes_g(s + 0.5)
    log_val += genus_factor * bracket
    log_val += np.sum(np.log(factors) - x * x / rhos ** 2)
    return complex(np.exp(log_val)), log_tail
