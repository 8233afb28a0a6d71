"""Point-pair kernels, automorphic kernels, and the orbital integral.

The kernel K(z', z) = -i A Phi(sigma) B is assembled from the real
profile pair (phi1, phi2) = -i * (1/pi) Int H(sigma; rho) h(rho) drho
(the contour integral is purely imaginary for real even h, so the
stored profiles are real) and the unit-modulus prefactor products:

    K = [[P11 phi1, P12 phi2], [P21 phi2, P22 phi1]].

Exact symmetries of the assembled kernel, for any admissible h:

* equivariance  K(g z', g z) = J_g(z',1) K(z', z) J_g(z,1)^{-1} for every
  g in SL(2,R);
* the pair identity K(z', z) = s3 K(z, z')^dagger s3 with s3 = diag(1,-1);
  its diagonal entries are literally hermitian-pair, the off-diagonal
  entries acquire a sign.  Full entrywise hermiticity cannot coexist with
  exact equivariance here: the operator behind K averages resolvents over
  a one-sided contour and is not self-adjoint (its eigenvalues Lambda(rho)
  are complex, only Lambda(rho) + Lambda(-rho) = 2 h(rho) is real).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ContractError, QuadratureError, SingularPairError, TailBoundError
from .moebius import Point, factor_J, pair_products, sigma_invariant
from .specfun import h1_integral, h1_series, h2_integral, h2_series
from .testfn import FourierPair, TestFunction, fourier_g

__all__ = [
    "PointPairKernel",
    "build_point_pair",
    "kernel_eval",
    "kernel_symmetry_residuals",
    "kernel_equivariance_residual",
    "kernel_diagonal_trace",
    "coth_integral",
    "automorphic_kernel",
    "transpp_residual",
    "OrbitalIntegral",
    "orbital_integral",
    "fit_kernel_decay",
]

_PI = np.pi
_SIGMA_SWITCH = 1.25


# ---------------------------------------------------------------------------
# profile construction
# ---------------------------------------------------------------------------

def _rho_grid(h: TestFunction, contour_eps: float, tol: float):
    """Panelled Gauss-Legendre nodes for the profile integral.

    Returns (half_nodes, half_weights, shifted_nodes, shifted_weights,
    tail): the positive real half-axis grid used by the series path
    (where the rho -> -rho parity folds the integral to 2i Im), and the
    full grid on Im rho = -contour_eps for the near-diagonal integral
    representation.  The half-range X is pushed out until the integrand
    envelope sqrt(|rho|) |h| integrates below tol beyond X.
    """
    x = 2.0
    while x < 2.0e4:
        tail = quad(lambda t: np.sqrt(1.0 + t) * abs(h(t - 1j * contour_eps)),
                    x, np.inf, limit=200)[0]
        if tail < 0.2 * tol:
            break
        x *= 1.6
    else:
        raise QuadratureError("profile quadrature range for h grew too large")
    edges = [0.0, 0.5, 1.0, 2.0, 4.0]
    while edges[-1] < x:
        edges.append(min(edges[-1] * 2.0, x))
    base, wts = np.polynomial.legendre.leggauss(16)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, hw = (hi + lo) / 2.0, (hi - lo) / 2.0
        nodes.append(mid + hw * base)
        weights.append(hw * wts)
    xs = np.concatenate(nodes)
    ws = np.concatenate(weights)
    full = np.concatenate([-xs[::-1], xs]) - 1j * contour_eps
    full_w = np.concatenate([ws[::-1], ws])
    return xs, ws, full, full_w, float(tail)


def _h_contour_block(sigmas: np.ndarray, rhos: np.ndarray, cw: np.ndarray,
                     zmax: float, chunk: int = 4096):
    """sum_r cw_r H1(sigma; rho_r) and the H2 sum, fused over blocks.

    Runs one joint hypergeometric term recurrence over a (node, sigma)
    block per sigma chunk; the term count follows from the geometric tail
    at the bucket's largest 1/sigma.
    """
    from scipy.special import loggamma

    m_max = int(np.ceil(39.0 / max(-np.log(min(zmax, 0.999)), 1e-9))) + 12
    grat = np.exp(2.0 * loggamma(1.0 + 1j * rhos) - loggamma(1.0 + 2j * rhos))
    pref1 = cw * (1j * grat / (4.0 * _PI))
    pref2 = cw * (-1j * grat / (4.0 * _PI))
    a_a = 1j * rhos            # F(a, 1+a; 1+2a; z) for H1
    a_b = 1.0 + 1j * rhos      # F(b, b; 1+2a; z) for H2
    c_ab = 1.0 + 2j * rhos
    out1 = np.empty(len(sigmas), dtype=complex)
    out2 = np.empty(len(sigmas), dtype=complex)
    for lo in range(0, len(sigmas), chunk):
        s = sigmas[lo:lo + chunk]
        z = (1.0 / s)[None, :]
        term_a = np.ones((len(rhos), len(s)), dtype=complex)
        term_b = np.ones_like(term_a)
        fa = term_a.copy()
        fb = term_b.copy()
        for m in range(m_max):
            ca = ((a_a + m) * (a_a + 1.0 + m) / ((c_ab + m) * (m + 1.0)))[:, None]
            cb = ((a_b + m) * (a_b + m) / ((c_ab + m) * (m + 1.0)))[:, None]
            term_a = term_a * ca * z
            term_b = term_b * cb * z
            fa += term_a
            fb += term_b
        # H1 = pref1 sigma^{-1/2 - i rho} F_a
        # H2 = pref2 sigma^{-1 - i rho} sqrt(sigma - 1) F_b
        pow1 = s[None, :] ** (-0.5 - 1j * rhos[:, None])
        out1[lo:lo + chunk] = np.einsum("r,rs->s", pref1, pow1 * fa)
        out2[lo:lo + chunk] = np.einsum(
            "r,rs->s", pref2, pow1 * fb * (np.sqrt(s - 1.0) / np.sqrt(s))[None, :])
    return out1, out2


@dataclass
class PointPairKernel:
    """Real profile pair phi(sigma) with its source test function.

    decay_constant/decay_exponent give the fitted bound
    |phi_i(sigma)| <= C sigma^(-1-eps); kernel_bound/kernel_rate the
    fitted exponential bound on |K_i| in the distance.
    """

    h: TestFunction
    pair: FourierPair
    contour_eps: float
    rho_nodes: np.ndarray          # positive real-axis nodes (series path)
    rho_weights: np.ndarray
    contour_nodes: np.ndarray      # full shifted grid (integral path)
    contour_weights: np.ndarray
    quadrature_tail: float
    decay_constant: float = 0.0
    decay_exponent: float = 0.0
    kernel_bound: float = 0.0
    kernel_rate: float = 0.0
    imag_leak: float = 0.0

    def phi(self, sigma):
        """Profiles (phi1, phi2), both real, vectorized over sigma >= 1.

        phi2 carries the exact sqrt(sigma-1) prefactor value 0 at
        sigma = 1; phi1 has a finite sigma -> 1 limit because the log
        singularity of H1 integrates against rho h(rho) to zero.  The
        contour sum is fused over (node, sigma) blocks: one joint 2F1
        term recurrence per sigma bucket.
        """
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        if np.any(sigma < 1.0):
            raise ContractError("phi needs sigma >= 1")
        phi1 = np.zeros(len(sigma))
        phi2 = np.zeros(len(sigma))
        big = sigma >= _SIGMA_SWITCH
        # series path on the folded deep contour: the Schwarz parity
        # H(sigma; -conj rho) = -conj H(sigma; rho) (with h real on the
        # real axis) folds the integral to (2/pi) Im sum_{Re rho > 0} w h H
        hvals = self.h(self.rho_nodes)
        edges = (0.0, 0.1, 0.25, 0.45, 0.65, 1.0 / _SIGMA_SWITCH + 1e-12)
        inv = np.where(sigma > 1.0, 1.0 / sigma, 1.0)
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = big & (inv >= lo) & (inv < hi)
            if not np.any(sel):
                continue
            a1, a2 = _h_contour_block(sigma[sel], self.rho_nodes,
                                      self.rho_weights * hvals, float(hi))
            phi1[sel] = (2.0 / _PI) * a1.imag
            phi2[sel] = (2.0 / _PI) * a2.imag
        # near-diagonal path needs the damped integral representation,
        # hence the shifted contour
        small = np.nonzero(~big)[0]
        if len(small):
            hc = self.h(self.contour_nodes)
            for i in small:
                s = float(max(sigma[i], 1.0 + 1e-9))
                acc1 = 0.0 + 0.0j
                acc2 = 0.0 + 0.0j
                for r, w, hv in zip(self.contour_nodes, self.contour_weights, hc):
                    acc1 += w * hv * h1_integral(s, r)
                    if sigma[i] > 1.0:
                        acc2 += w * hv * h2_integral(float(sigma[i]), r)
                v1 = -1j * acc1 / _PI
                v2 = -1j * acc2 / _PI
                self.imag_leak = max(self.imag_leak,
                                     float(abs(v1.imag)), float(abs(v2.imag)))
                phi1[i] = v1.real
                phi2[i] = v2.real
        phi2[sigma == 1.0] = 0.0
        return phi1, phi2


def build_point_pair(h: TestFunction, contour_eps: float = 0.1,
                     tol: float = 1e-9) -> PointPairKernel:
    """Construct the profile evaluator and fit its decay bounds.

    The near-diagonal integral representation runs on the contour
    Im rho = -contour_eps.  The series path folds onto the half-contour
    at depth ~0.95 beta: H(sigma; -conj rho) = -conj H(sigma; rho) makes
    the fold exact on any symmetric contour, and the deep shift turns the
    large-sigma decay from oscillatory cancellation (which a fixed grid
    cannot resolve once log sigma is large) into the hard bound
    sigma^(-1/2-beta).  The decay exponent is the log-log slope of phi1
    over sigma in [2, 100]; the kernel bound is fitted on distances [2, 8].
    """
    pair = fourier_g(h)  # validates admissibility
    beta_deep = min(0.95 * h.beta, 1.5)
    half, half_w, full, full_w, tail = _rho_grid(h, contour_eps, tol)
    kern = PointPairKernel(h=h, pair=pair, contour_eps=contour_eps,
                           rho_nodes=half - 1j * beta_deep, rho_weights=half_w,
                           contour_nodes=full, contour_weights=full_w,
                           quadrature_tail=tail)
    sig = np.geomspace(2.0, 100.0, 25)
    p1, p2 = kern.phi(sig)
    mags = np.maximum(np.abs(p1), np.abs(p2)) + 1e-300
    slope = np.polyfit(np.log(sig), np.log(mags), 1)[0]
    kern.decay_exponent = float(slope)
    kern.decay_constant = float(np.max(mags * sig ** (-slope)))
    if slope > -1.0:
        raise ContractError(
            f"profile decay exponent {slope:.3f} violates the sigma^(-1-eps) bound")
    d = np.linspace(2.0, 8.0, 13)
    sig_d = (np.cosh(d) + 1.0) / 2.0
    q1, q2 = kern.phi(sig_d)
    kmags = np.maximum(np.abs(q1), np.abs(q2)) + 1e-300
    rate = -np.polyfit(d, np.log(kmags), 1)[0]
    kern.kernel_rate = float(rate)
    kern.kernel_bound = float(np.max(kmags * np.exp(rate * d)))
    return kern


# ---------------------------------------------------------------------------
# kernel evaluation and symmetry checks
# ---------------------------------------------------------------------------

def kernel_eval(kern: PointPairKernel, z1: Point, z2: Point) -> np.ndarray:
    """K(z1, z2) as a 2x2 complex matrix; coincident points are singular."""
    sig = sigma_invariant(z1, z2)
    if sig <= 1.0:
        raise SingularPairError("kernel evaluated at coincident points")
    p11, p12, p21, p22 = pair_products(z1, z2)
    (phi1,), (phi2,) = kern.phi(np.array([sig]))
    return np.array([[p11 * phi1, p12 * phi2],
                     [p21 * phi2, p22 * phi1]])


def kernel_symmetry_residuals(kern: PointPairKernel, z1: Point, z2: Point) -> dict:
    """Residuals of the two pair identities at (z1, z2).

    'diagonal_hermitian': max over diagonal entries of
    |K(z1,z2) - K(z2,z1)^dagger|; 'twisted_pair': the full matrix residual
    of K(z1,z2) = s3 K(z2,z1)^dagger s3, the exact symmetry of the
    construction.
    """
    k12 = kernel_eval(kern, z1, z2)
    k21 = kernel_eval(kern, z2, z1)
    dag = k21.conj().T
    s3 = np.diag([1.0, -1.0])
    return {
        "diagonal_hermitian": float(np.max(np.abs(np.diag(k12) - np.diag(dag)))),
        "twisted_pair": float(np.max(np.abs(k12 - s3 @ dag @ s3))),
    }


def kernel_equivariance_residual(kern: PointPairKernel, g, z1: Point, z2: Point) -> float:
    """|K(g z1, g z2) - J_g(z1,1) K(z1,z2) J_g(z2,1)^{-1}|, max entrywise."""
    lhs = kernel_eval(kern, g.act(z1), g.act(z2))
    j1 = factor_J(g, z1, 1)
    j2 = factor_J(g, z2, 1)
    rhs = j1 @ kernel_eval(kern, z1, z2) @ np.linalg.inv(j2)
    return float(np.max(np.abs(lhs - rhs)))


def fit_kernel_decay(kern: PointPairKernel, d_lo: float = 2.0, d_hi: float = 8.0):
    """Fitted (C_kappa, rate) with |K_i| <= C_kappa e^{-rate d} on [d_lo, d_hi]."""
    d = np.linspace(d_lo, d_hi, 13)
    sig = (np.cosh(d) + 1.0) / 2.0
    p1, p2 = kern.phi(sig)
    mags = np.maximum(np.abs(p1), np.abs(p2)) + 1e-300
    rate = -np.polyfit(d, np.log(mags), 1)[0]
    return float(np.max(mags * np.exp(rate * d))), float(rate)


# ---------------------------------------------------------------------------
# the diagonal trace
# ---------------------------------------------------------------------------

def coth_integral(h: TestFunction) -> float:
    """Int_{-inf}^{inf} rho h(rho) coth(pi rho) drho for even real h.

    Split at rho = 1: direct adaptive quadrature below (the integrand is
    continuous with value h(0)/pi at 0), the geometric coth expansion
    coth(pi rho) = 1 + 2 sum e^{-2 pi n rho} above, where each extra term
    is down by e^{-2 pi}.
    """
    def low(r):
        if r < 1e-12:
            return float(np.real(h(0.0))) / _PI
        return float(np.real(h(r))) * r / np.tanh(_PI * r)

    part_low = quad(low, 0.0, 1.0, limit=300, epsabs=1e-14, epsrel=1e-13)[0]
    part_high = quad(lambda r: float(np.real(h(r))) * r, 1.0, np.inf,
                     limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    n = 1
    while True:
        term = quad(lambda r: float(np.real(h(r))) * r * np.exp(-2.0 * _PI * n * r),
                    1.0, np.inf, limit=200, epsabs=1e-16, epsrel=1e-12)[0]
        part_high += 2.0 * term
        if abs(term) < 1e-17:
            break
        n += 1
        if n > 40:
            raise QuadratureError("coth expansion did not converge")
    return 2.0 * (part_low + part_high)


def kernel_diagonal_trace(h: TestFunction) -> float:
    """tr K(z, z) = (1/2 pi) Int rho h(rho) coth(pi rho) drho."""
    return coth_integral(h) / (2.0 * _PI)


# ---------------------------------------------------------------------------
# automorphic kernel
# ---------------------------------------------------------------------------

def automorphic_kernel(kern: PointPairKernel, z1: Point, z2: Point,
                       presentation, ms, ball: float,
                       tol: float | None = None):
    """K_Gamma(z1, z2) by a truncated Poincare sum over the group ball.

    One term per PSL class (the +/- lift pair cancels the global 1/2).
    The tail estimate combines the fitted kernel decay with the analytic
    orbit-count density; exceeding a given tolerance raises.
    Returns (matrix, tail_estimate).
    """
    from . import fuchsian

    ball_data = fuchsian.group_ball(presentation, ball)
    chi = fuchsian.chi_of_ball(ball_data, ms)
    mats = ball_data.mats
    z2c = z2.z
    gz = (mats[:, 0, 0] * z2c + mats[:, 0, 1]) / (mats[:, 1, 0] * z2c + mats[:, 1, 1])
    theta = np.angle(mats[:, 1, 0] * z2c + mats[:, 1, 1])
    jd = np.exp(1j * theta)

    sig = (2.0 + np.abs(z1.z - gz) ** 2 / (2.0 * z1.y * gz.imag)) / 2.0
    if np.min(sig) <= 1.0 + 1e-14:
        raise SingularPairError("automorphic kernel needs z1 != z2 mod Gamma")
    phi1, phi2 = kern.phi(sig)

    p = z1.z - gz
    ap = np.abs(p)
    r = gz - np.conj(z1.z)
    q = z1.z - np.conj(gz)
    p11 = np.sqrt(r / q)
    p12 = 1j * np.conj(p) / ap
    p21 = -1j * p / ap

    w = chi * jd
    wbar = chi * np.conj(jd)
    out = np.array([
        [np.sum(p11 * phi1 * w), np.sum(p12 * phi2 * wbar)],
        [np.sum(p21 * phi2 * w), np.sum((1.0 / p11) * phi1 * wbar)],
    ])

    c_k, rate = kern.kernel_bound, kern.kernel_rate
    from .moebius import hyperbolic_distance

    origin = Point(0.0, 1.0)
    s0 = hyperbolic_distance(z1, origin) + hyperbolic_distance(z2, origin)
    net = rate - 1.0  # shell growth e^u against kernel decay e^{-rate u}
    if net <= 0.0:
        raise TailBoundError(
            f"kernel decay rate {rate:.3f} too weak for a convergent Poincare sum")
    tail = (4.0 * _PI / presentation.area) * c_k \
        * np.exp(-net * max(ball - s0, 0.0)) / net
    if tol is not None and tail > tol:
        raise TailBoundError(f"Poincare tail {tail:.3e} exceeds tolerance {tol:.3e}")
    return out, float(tail)


def transpp_residual(kern: PointPairKernel, g1, g2, z1: Point, z2: Point,
                     presentation, ms, ball: float) -> float:
    """Two-slot automorphy residual of the automorphic kernel.

    Checks K_Gamma(g1 z1, g2 z2) = chi(g1) J_{g1}(z1,1) K_Gamma(z1,z2)
    J_{g2}(z2,1)^{-1} chi(g2)^{-1} for group elements g1, g2 given as
    (GroupElement, Word) pairs.
    """
    (m1, w1), (m2, w2) = g1, g2
    from .fuchsian import evaluate_chi

    chi1 = evaluate_chi(ms, w1)
    chi2 = evaluate_chi(ms, w2)
    lhs, _ = automorphic_kernel(kern, m1.act(z1), m2.act(z2), presentation, ms, ball)
    base, _ = automorphic_kernel(kern, z1, z2, presentation, ms, ball)
    j1 = factor_J(m1, z1, 1)
    j2 = factor_J(m2, z2, 1)
    rhs = chi1 * (j1 @ base @ np.linalg.inv(j2)) / chi2
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# orbital integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitalIntegral:
    quadrature: float
    closed_form: float

    @property
    def difference(self) -> float:
        return abs(self.quadrature - self.closed_form)


def orbital_integral(h_or_kern, l: float, n: int = 1, nu: int = 4,
                     nv: int = 48, v_tol: float = 1e-13) -> OrbitalIntegral:
    """Hyperbolic orbital integral against the closed form l g(nl)/sinh(nl/2).

    Quadrature of tr Int_1^{e^l} Int_R K(z, gamma^n z) dx dy/y^2 for the
    Jordan-form boost gamma = diag(e^{l/2}, e^{-l/2}), in the coordinates
    u = log y (the integrand is constant along the axis), v = x/y
    (truncated where the kernel's own decay drops below v_tol).
    """
    if l <= 0 or n < 1:
        raise ContractError("orbital integral needs l > 0 and n >= 1")
    kern = h_or_kern if isinstance(h_or_kern, PointPairKernel) else build_point_pair(h_or_kern)
    a = n * l / 2.0
    ea = np.exp(2.0 * a)

    def tr_k(v):
        v = np.asarray(v, dtype=float)
        sig = np.cosh(a) ** 2 + np.sinh(a) ** 2 * v * v
        w = (ea - 1.0) * v + 1j * (ea + 1.0)
        pref = 2.0 * np.sqrt(-w / np.conj(w)).real
        phi1, _ = kern.phi(sig)
        return pref * phi1

    vmax = 8.0
    while vmax < 1e7:
        if abs(float(tr_k(np.array([vmax]))[0])) * vmax < v_tol:
            break
        vmax *= 2.0
    else:
        raise QuadratureError("orbital x-truncation did not close; kernel decay too weak")

    edges = [0.0, 0.5, 1.0, 2.0, 4.0]
    while edges[-1] < vmax:
        edges.append(min(edges[-1] * 2.0, vmax))
    vg, vw = np.polynomial.legendre.leggauss(nv)
    ug, uw = np.polynomial.legendre.leggauss(nu)
    u_nodes = (ug + 1.0) / 2.0 * l
    u_weights = uw * l / 2.0

    # product rule over (u, v); the integrand is independent of u = log y,
    # so the u-sum contributes its exact weight total l
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, hw = (hi + lo) / 2.0, (hi - lo) / 2.0
        vals = tr_k(mid + hw * vg)
        total += 2.0 * float(np.sum(u_weights)) * float(np.sum(hw * vw * vals))
    del u_nodes
    closed = float(l * kern.pair.g(n * l) / np.sinh(n * l / 2.0))
    return OrbitalIntegral(total, closed)
