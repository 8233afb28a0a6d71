"""Special functions and the free/automorphic Green's functions.

Gauss hypergeometric series with tail control, complex digamma, Barnes G,
the 2x2 radial kernel H(sigma; rho) in both its hypergeometric-series and
exponential-integral representations, the first-order ODE residual that
characterizes H, and the Green's functions assembled from H.

The kernel H solves, with L := sqrt(sigma(sigma-1)) d/dsigma
+ (1/2) sqrt((sigma-1)/sigma),

    rho H1 + i L H2 + (i/2) (sigma(sigma-1))^(-1/2) H2 = 0
    rho H2 + i L H1                                    = 0

and is normalized by its logarithmic diagonal singularity at sigma = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import loggamma

from .errors import ContractError, DomainError, QuadratureError, TailBoundError
from .moebius import Point, hyperbolic_distance, pair_products, sigma_invariant

__all__ = [
    "gauss_2f1",
    "digamma",
    "barnes_g",
    "log_barnes_g",
    "barnes_g_zero_order",
    "GreenKernel",
    "SpectralParameter",
    "h_kernel",
    "greenh_residual",
    "green_free",
    "green_automorphic",
    "fit_green_decay",
]

_PI = np.pi

# Glaisher-Kinkelin constant: log A = 1/12 - zeta'(-1)
_LOG_GLAISHER = 1.0 / 12.0 + 0.16542114370045092922

_SERIES_SIGMA_SWITCH = 1.25  # below this, the series in 1/sigma degrades


@dataclass(frozen=True)
class SpectralParameter:
    """Spectral parameter rho; resolvent-grade use requires Im rho < -1/2."""

    rho: complex

    @property
    def resolvent_grade(self) -> bool:
        return self.rho.imag < -0.5


def _rho_value(rho) -> complex:
    return complex(rho.rho) if isinstance(rho, SpectralParameter) else complex(rho)


# ---------------------------------------------------------------------------
# Gauss hypergeometric series
# ---------------------------------------------------------------------------

def gauss_2f1(a, b, c, z, tol: float = 1e-14, maxterm: int = 100000):
    """2F1(a,b;c;z) by the defining series, |z| < 1, complex parameters.

    Vectorized over z.  Stops when the geometric tail bound drops below
    tol relative to the partial sum.  Raises DomainError for c at a
    non-positive integer and for |z| >= 1 - 1e-6, where the series is
    useless and the integral representation should be used instead.
    """
    a, b, c = complex(a), complex(b), complex(c)
    if abs(c - round(c.real)) < 1e-14 and round(c.real) <= 0 and abs(c.imag) < 1e-14:
        raise DomainError(f"2F1 parameter pole: c = {c}")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    zmax = float(np.max(np.abs(z)))
    if zmax >= 1.0 - 1e-6:
        raise DomainError(f"2F1 series not convergent enough at |z| = {zmax:.8f}")
    term = np.ones_like(z)
    total = term.copy()
    for m in range(maxterm):
        term = term * ((a + m) * (b + m) / ((c + m) * (m + 1))) * z
        total += term
        # once the term ratio is below r < 1, the tail is bounded by
        # |term| * r / (1 - r)
        r = abs((a + m + 1) * (b + m + 1) / ((c + m + 1) * (m + 2))) * zmax
        if r < 1.0:
            tail = np.max(np.abs(term)) * r / (1.0 - r)
            if tail < tol * max(1.0, float(np.min(np.abs(total)))):
                break
    else:
        raise QuadratureError("2F1 series did not converge within the term budget")
    return complex(total[0]) if scalar else total


# ---------------------------------------------------------------------------
# digamma and Barnes G
# ---------------------------------------------------------------------------

_BERNOULLI_OVER_2N = (  # B_{2n}/(2n) for the digamma asymptotic series
    1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
    1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0,
)


def digamma(z) -> complex:
    """Complex digamma psi(z) = Gamma'(z)/Gamma(z), abs error <= 1e-13.

    Recurrence pushes |z| above 9, then the de Moivre asymptotic series;
    reflection handles Re z < 1/2.  Poles at non-positive integers raise.
    """
    z = complex(z)
    if abs(z.imag) < 1e-14 and abs(z.real - round(z.real)) < 1e-14 and round(z.real) <= 0:
        raise DomainError(f"digamma pole at z = {z}")
    if z.real < 0.5:
        return digamma(1.0 - z) - _PI / np.tan(_PI * z)
    acc = 0.0 + 0.0j
    while abs(z) < 9.0:
        acc -= 1.0 / z
        z += 1.0
    w = 1.0 / (z * z)
    s = 0.0 + 0.0j
    for coeff in reversed(_BERNOULLI_OVER_2N):
        s = (s + coeff) * w
    return acc + np.log(z) - 0.5 / z - s


_BARNES_ASYMP = (  # B_{2k+2}/(2k(2k+1)(2k+2)), k = 1..5
    -1.0 / 720.0, 1.0 / 5040.0, -1.0 / 10080.0, 1.0 / 9504.0, -691.0 / 3603600.0,
)


def barnes_g_zero_order(z) -> int:
    """Order of the zero of G at z (m+1 at z = -m, m >= 0; else 0)."""
    z = complex(z)
    if abs(z.imag) < 1e-12:
        n = round(z.real)
        if n <= 0 and abs(z.real - n) < 1e-12:
            return 1 - n
    return 0


def log_barnes_g(z) -> complex:
    """log G(z), up to the branch of the continuation (exact under exp).

    Recurrence G(z+1) = Gamma(z) G(z) pushes Re z above 11, then the
    large-argument expansion of log G(1+w) in terms of log Gamma(w+1)
    with the Glaisher constant and the Bernoulli tail.
    """
    z = complex(z)
    if barnes_g_zero_order(z):
        raise DomainError(f"Barnes G has a zero at z = {z}; log diverges")
    acc = 0.0 + 0.0j
    while z.real < 11.0:
        acc -= loggamma(z)
        z += 1.0
    w = z - 1.0  # expansion is for log G(1+w)
    s = 0.0 + 0.0j
    iw2 = 1.0 / (w * w)
    for coeff in reversed(_BARNES_ASYMP):
        s = (s + coeff) * iw2
    lg = w * w / 4.0 + w * loggamma(w + 1.0) \
        - (w * (w + 1.0) / 2.0 + 1.0 / 12.0) * np.log(w) - _LOG_GLAISHER + s
    return acc + lg


def barnes_g(z) -> complex:
    """Barnes double-Gamma G(z); exact 0 at its zeros, rel error <= 1e-10."""
    if barnes_g_zero_order(z):
        return 0.0
    return complex(np.exp(log_barnes_g(z)))


# ---------------------------------------------------------------------------
# the radial kernel H(sigma; rho)
# ---------------------------------------------------------------------------

def _gamma_ratio(rho: complex) -> complex:
    # Gamma(1+i rho)^2 / Gamma(1+2i rho); regular at rho = 0
    return complex(np.exp(2.0 * loggamma(1.0 + 1j * rho) - loggamma(1.0 + 2j * rho)))


def h1_series(sigma, rho):
    """Diagonal kernel component, hypergeometric form; sigma > 1, vectorized.

    Written with rho Gamma(i rho) Gamma(1+i rho) = -i Gamma(1+i rho)^2 so
    the formula stays regular at rho = 0.
    """
    rho = _rho_value(rho)
    sigma = np.asarray(sigma, dtype=float)
    fa = gauss_2f1(1j * rho, 1.0 + 1j * rho, 1.0 + 2j * rho, 1.0 / sigma)
    return (1j * _gamma_ratio(rho) / (4.0 * _PI)) * sigma ** (-0.5 - 1j * rho) * fa


def h2_series(sigma, rho):
    """Off-diagonal kernel component, hypergeometric form; sigma > 1."""
    rho = _rho_value(rho)
    sigma = np.asarray(sigma, dtype=float)
    fb = gauss_2f1(1.0 + 1j * rho, 1.0 + 1j * rho, 1.0 + 2j * rho, 1.0 / sigma)
    return (-1j * _gamma_ratio(rho) / (4.0 * _PI)) * sigma ** (-1.0 - 1j * rho) \
        * np.sqrt(sigma - 1.0) * fb


def _exp_integral(sigma: float, rho: complex, extra_pow: int) -> complex:
    """Core integral int_0^1 t^{ir}(1-t)^{ir-1}(sigma-t)^{-ir-extra} dt.

    Substituting 1 - t = e^{-w} gives a smooth exponentially damped
    oscillatory integrand on [0, W] plus an analytic tail; requires
    Im rho < 0 for convergence.
    """
    if rho.imag >= 0.0:
        raise DomainError(f"integral representation needs Im rho < 0, got {rho}")

    def f(w):
        t = 1.0 - np.exp(-w)
        st = sigma - t
        return t ** (1j * rho) * st ** (-1j * rho - extra_pow) * np.exp(-1j * rho * w)

    # beyond W the integrand is C_inf e^{-i rho w} (1 + O(e^{-w}))
    W = 38.0
    import warnings

    with warnings.catch_warnings():
        # quad flags roundoff at these tolerances; accuracy is verified by
        # the cross-representation suite at 1e-14
        warnings.simplefilter("ignore")
        re = quad(lambda w: f(w).real, 0.0, W, limit=1200, epsabs=1e-15, epsrel=1e-13)[0]
        im = quad(lambda w: f(w).imag, 0.0, W, limit=1200, epsabs=1e-15, epsrel=1e-13)[0]
    c_inf = (sigma - 1.0) ** (-1j * rho - extra_pow)
    tail = c_inf * np.exp(-1j * rho * W) / (1j * rho)
    return re + 1j * im + tail


def h1_integral(sigma: float, rho) -> complex:
    """Diagonal component by the damped-exponential integral; Im rho < 0."""
    rho = _rho_value(rho)
    sigma = float(sigma)
    if sigma <= 1.0:
        raise DomainError("h1 integral representation requires sigma > 1")
    return -rho / (4.0 * _PI) * sigma ** (-0.5) * _exp_integral(sigma, rho, 0)


def h2_integral(sigma: float, rho) -> complex:
    """Off-diagonal component by the damped-exponential integral; Im rho < 0."""
    rho = _rho_value(rho)
    sigma = float(sigma)
    if sigma < 1.0:
        raise DomainError("h2 integral representation requires sigma >= 1")
    if sigma == 1.0:
        return 0.0
    return rho / (4.0 * _PI) * np.sqrt(sigma - 1.0) * _exp_integral(sigma, rho, 1)


@dataclass(frozen=True)
class GreenKernel:
    """The 2x2 kernel H = [[H1, H2], [H2, H1]] at one (sigma, rho)."""

    sigma: float
    rho: complex
    h1: complex
    h2: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.h1, self.h2], [self.h2, self.h1]])


def h_kernel(sigma: float, rho, representation: str = "auto") -> np.ndarray:
    """Evaluate H(sigma; rho) as a 2x2 matrix (H3 = H2, H4 = H1).

    representation: 'hypergeometric', 'integral', or 'auto' (series for
    sigma >= 1.25, integral below, where the 1/sigma series crawls).
    """
    sigma = float(sigma)
    rho = _rho_value(rho)
    if sigma < 1.0:
        raise DomainError(f"sigma = {sigma} < 1")
    if representation == "auto":
        representation = "hypergeometric" if sigma >= _SERIES_SIGMA_SWITCH else "integral"
    if representation == "hypergeometric":
        if sigma == 1.0:
            raise DomainError("hypergeometric representation diverges at sigma = 1")
        h1 = complex(h1_series(sigma, rho))
        h2 = complex(h2_series(sigma, rho))
    elif representation == "integral":
        h1 = h1_integral(sigma, rho)
        h2 = h2_integral(sigma, rho)
    else:
        raise ContractError(f"unknown representation {representation!r}")
    return GreenKernel(sigma, rho, h1, h2).matrix


def greenh_residual(sigma: float, rho, step: float = 1e-4, representation: str = "auto") -> float:
    """Max residual of the two-component radial ODE at (sigma, rho).

    Derivatives in sigma by 4th-order central differences with the given
    step; needs sigma - 2*step > 1 clearance from the endpoint.
    """
    sigma = float(sigma)
    rho = _rho_value(rho)
    if sigma - 2.0 * step <= 1.0 + 1e-4 - 1e-12:
        raise DomainError("stencil needs clearance: sigma - 2 step > 1 + 1e-4")
    offs = np.array([-2.0, -1.0, 1.0, 2.0])
    wgt = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    vals = [h_kernel(sigma + o * step, rho, representation) for o in offs]
    h0 = h_kernel(sigma, rho, representation)
    d1 = sum(w * v for w, v in zip(wgt, vals)) / step
    sq = np.sqrt(sigma * (sigma - 1.0))
    sq2 = 0.5 * np.sqrt((sigma - 1.0) / sigma)
    lop_h1 = sq * d1[0, 0] + sq2 * h0[0, 0]
    lop_h2 = sq * d1[0, 1] + sq2 * h0[0, 1]
    e1 = rho * h0[0, 0] + 1j * lop_h2 + 1j / (2.0 * sq) * h0[0, 1]
    e2 = rho * h0[0, 1] + 1j * lop_h1
    return float(max(abs(e1), abs(e2)))


# ---------------------------------------------------------------------------
# Green's functions on H^2 and on the quotient
# ---------------------------------------------------------------------------

def green_free(z1: Point, z2: Point, rho) -> np.ndarray:
    """Free Green's function G(z1, z2; rho) = A H(sigma; rho) B.

    Satisfies (D + rho) G = 0 in the first slot away from coincidence and
    decays for Im rho < 0.  The diagonal entries carry the logarithmic
    short-distance singularity (rho/2pi) log d.
    """
    rho = _rho_value(rho)
    sig = sigma_invariant(z1, z2)
    H = h_kernel(sig, rho)
    p11, p12, p21, p22 = pair_products(z1, z2)
    return np.array([
        [p11 * H[0, 0], p12 * H[0, 1]],
        [p21 * H[1, 0], p22 * H[1, 1]],
    ])


def fit_green_decay(rho, d_grid=None):
    """Fit |G_i| <= C |rho| e^{-(1/2 - Im rho) d}: returns (C, exponent).

    The exponent is measured by least squares on log max_i |H_i| over the
    grid (default d in [3, 10]); C is the max envelope constant.
    """
    rho = _rho_value(rho)
    if d_grid is None:
        d_grid = np.linspace(3.0, 10.0, 15)
    d_grid = np.asarray(d_grid, dtype=float)
    sig = (np.cosh(d_grid) + 1.0) / 2.0
    mags = np.maximum(np.abs(h1_series(sig, rho)), np.abs(h2_series(sig, rho)))
    slope, _ = np.polyfit(d_grid, np.log(mags), 1)
    rate = 0.5 - rho.imag
    c_fit = float(np.max(mags * np.exp(rate * d_grid))) / max(abs(rho), 1e-30)
    return c_fit, float(slope)


def green_automorphic(z1: Point, z2: Point, rho, presentation, ms, ball: float,
                      tol: float | None = None):
    """Automorphic Green's function by a truncated Poincare series.

    Sums G(z1, gamma z2) chi(gamma) J_gamma(z2, 1) over the group elements
    with basepoint displacement <= ball (one term per PSL class; the +/-
    lift pair cancels the paper's global 1/2).  Requires Im rho < -1/2
    with a 1e-3 margin.  Returns (matrix, tail_estimate); raises
    TailBoundError if a tolerance is given and the tail exceeds it.
    """
    from . import fuchsian  # local import: fuchsian does not import specfun

    rho = _rho_value(rho)
    if not (rho.imag < -0.5 - 1e-3):
        raise DomainError(f"green_automorphic needs Im rho < -1/2 (margin 1e-3), got {rho}")
    ball_data = fuchsian.group_ball(presentation, ball)
    chi = fuchsian.chi_of_ball(ball_data, ms)
    mats = ball_data.mats

    z2c = z2.z
    gz = (mats[:, 0, 0] * z2c + mats[:, 0, 1]) / (mats[:, 1, 0] * z2c + mats[:, 1, 1])
    theta = np.angle(mats[:, 1, 0] * z2c + mats[:, 1, 1])
    j_diag = np.exp(1j * theta)

    total = np.zeros((2, 2), dtype=complex)
    # sigma_invariant over all translates at once: (cosh d + 1)/2
    sig = (2.0 + np.abs(z1.z - gz) ** 2 / (2.0 * z1.y * gz.imag)) / 2.0
    if np.min(sig) < 1.0 + 1e-14:
        raise DomainError("green_automorphic requires z1 != z2 mod Gamma")
    small = sig < _SERIES_SIGMA_SWITCH
    h1 = np.empty(len(sig), dtype=complex)
    h2 = np.empty(len(sig), dtype=complex)
    if np.any(~small):
        h1[~small] = h1_series(sig[~small], rho)
        h2[~small] = h2_series(sig[~small], rho)
    for i in np.nonzero(small)[0]:
        h1[i] = h1_integral(float(sig[i]), rho)
        h2[i] = h2_integral(float(sig[i]), rho)

    p = z1.z - gz
    ap = np.abs(p)
    r = gz - np.conj(z1.z)
    q = z1.z - np.conj(gz)
    p11 = np.sqrt(r / q)
    p12 = 1j * np.conj(p) / ap
    p21 = -1j * p / ap
    p22 = 1.0 / p11

    w = chi * j_diag
    wbar = chi * np.conj(j_diag)
    total[0, 0] = np.sum(p11 * h1 * w)
    total[1, 0] = np.sum(p21 * h2 * w)
    total[0, 1] = np.sum(p12 * h2 * wbar)
    total[1, 1] = np.sum(p22 * h1 * wbar)

    c_fit, _ = fit_green_decay(rho)
    origin = Point(0.0, 1.0)
    s0 = hyperbolic_distance(z1, origin) + hyperbolic_distance(z2, origin)
    decay = -(0.5 + rho.imag)  # net shell exponent e^{(1/2 + Im rho) u}
    tail = (4.0 * _PI / presentation.area) * abs(rho) * c_fit \
        * np.exp(-decay * max(ball - s0, 0.0)) / decay
    if tol is not None and tail > tol:
        raise TailBoundError(f"Poincare tail {tail:.3e} exceeds tolerance {tol:.3e}; raise ball")
    return total, float(tail)
