"""Weighted Maass/Dirac operators on sampled fields, and identity checks.

Order-4 central stencils on rectangular patches of the half-plane.  Every
application of a first- or second-order operator consumes two grid cells
of border; fields track that pad and residuals are taken on the shared
interior.  Identity checks run on analytic families (powers y^s, plane
waves in x, gaussian bumps), never on noise, so the observed residuals
follow the stencil order.

Operator conventions:

    K_k      = i y d/dx + y d/dy + k/2
    Lam_k    = i y d/dx - y d/dy + k/2
    Delta_k  = y^2 (dxx + dyy) - i k y d/dx
    D_k      = i [[0, K_{k-2}], [-Lam_k, 0]]
    T        = i sigma_2 C : (psi1, psi2) -> (conj psi2, -conj psi1)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import ContractError

__all__ = [
    "GridPatch",
    "ScalarField",
    "SpinorField",
    "apply_operator",
    "op_k",
    "op_lam",
    "op_delta",
    "op_dirac",
    "time_reversal",
    "residual",
    "square_identity_check",
    "transformation_check",
    "chiral_check",
    "time_reversal_check",
    "ladder_raise",
    "ladder_lower",
    "ladder_check",
    "s_operator_check",
    "scalar_s_check",
    "weight_shift_check",
    "special_eigenvalues",
    "magnetic_field",
    "planted_spinor",
    "gram_independence",
]


@dataclass(frozen=True)
class GridPatch:
    """Rectangular sampling patch; stencils must stay inside y > 0."""

    x0: float = -1.0
    x1: float = 1.0
    y0: float = 0.5
    y1: float = 2.0
    hx: float = 1e-3
    hy: float = 1e-3
    order: int = 4

    def __post_init__(self):
        if self.order != 4:
            raise ContractError("only order-4 stencils are implemented")
        if self.y0 - 2.0 * self.hy <= 0.0:
            raise ContractError("patch too close to the boundary: y0 - 2 hy <= 0")

    @property
    def x(self) -> np.ndarray:
        n = int(round((self.x1 - self.x0) / self.hx)) + 1
        return self.x0 + self.hx * np.arange(n)

    @property
    def y(self) -> np.ndarray:
        n = int(round((self.y1 - self.y0) / self.hy)) + 1
        return self.y0 + self.hy * np.arange(n)


@dataclass
class ScalarField:
    """Complex samples on a patch; pad counts border cells already consumed."""

    patch: GridPatch
    values: np.ndarray
    pad: int = 0

    @classmethod
    def from_function(cls, patch: GridPatch, fn) -> "ScalarField":
        x = patch.x[None, :]
        y = patch.y[:, None]
        return cls(patch, np.asarray(fn(x, y), dtype=complex) + 0j)

    def interior(self, extra: int = 2) -> np.ndarray:
        m = self.pad + extra
        return self.values[m:-m, m:-m] if m else self.values


@dataclass
class SpinorField:
    patch: GridPatch
    psi1: np.ndarray
    psi2: np.ndarray
    pad: int = 0

    @classmethod
    def from_functions(cls, patch: GridPatch, f1, f2) -> "SpinorField":
        a = ScalarField.from_function(patch, f1)
        b = ScalarField.from_function(patch, f2)
        return cls(patch, a.values, b.values)

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.patch, self.psi1 if i == 0 else self.psi2, self.pad)


def _dx(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[:, 2:-2] = (-v[:, 4:] + 8 * v[:, 3:-1] - 8 * v[:, 1:-3] + v[:, :-4]) / (12 * h)
    out[:, :2] = out[:, -2:] = 0.0
    return out


def _dy(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[2:-2, :] = (-v[4:, :] + 8 * v[3:-1, :] - 8 * v[1:-3, :] + v[:-4, :]) / (12 * h)
    out[:2, :] = out[-2:, :] = 0.0
    return out


def _dxx(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[:, 2:-2] = (-v[:, 4:] + 16 * v[:, 3:-1] - 30 * v[:, 2:-2]
                    + 16 * v[:, 1:-3] - v[:, :-4]) / (12 * h * h)
    out[:, :2] = out[:, -2:] = 0.0
    return out


def _dyy(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[2:-2, :] = (-v[4:, :] + 16 * v[3:-1, :] - 30 * v[2:-2, :]
                    + 16 * v[1:-3, :] - v[:-4, :]) / (12 * h * h)
    out[:2, :] = out[-2:, :] = 0.0
    return out


def op_k(f: ScalarField, k: int) -> ScalarField:
    """Weight raiser K_k = i y dx + y dy + k/2."""
    y = f.patch.y[:, None]
    vals = 1j * y * _dx(f.values, f.patch.hx) + y * _dy(f.values, f.patch.hy) \
        + (k / 2.0) * f.values
    return ScalarField(f.patch, vals, f.pad + 2)


def op_lam(f: ScalarField, k: int) -> ScalarField:
    """Weight lowerer Lam_k = i y dx - y dy + k/2."""
    y = f.patch.y[:, None]
    vals = 1j * y * _dx(f.values, f.patch.hx) - y * _dy(f.values, f.patch.hy) \
        + (k / 2.0) * f.values
    return ScalarField(f.patch, vals, f.pad + 2)


def op_delta(f: ScalarField, k: int) -> ScalarField:
    """Weighted Laplacian Delta_k = y^2 (dxx + dyy) - i k y dx."""
    y = f.patch.y[:, None]
    vals = y * y * (_dxx(f.values, f.patch.hx) + _dyy(f.values, f.patch.hy)) \
        - 1j * k * y * _dx(f.values, f.patch.hx)
    return ScalarField(f.patch, vals, f.pad + 2)


def op_dirac(F: SpinorField, k: int) -> SpinorField:
    """D_k = i [[0, K_{k-2}], [-Lam_k, 0]] on a spinor."""
    up = op_k(F.component(1), k - 2)
    dn = op_lam(F.component(0), k)
    return SpinorField(F.patch, 1j * up.values, -1j * dn.values, F.pad + 2)


def apply_operator(field, kind: str, k: int):
    """Dispatch by operator name: 'K', 'Lam', 'Delta' (scalar), 'D' (spinor)."""
    if kind == "D":
        if not isinstance(field, SpinorField):
            raise ContractError("D_k needs a spinor field")
        return op_dirac(field, k)
    if not isinstance(field, ScalarField):
        raise ContractError(f"{kind}_k needs a scalar field")
    try:
        return {"K": op_k, "Lam": op_lam, "Delta": op_delta}[kind](field, k)
    except KeyError:
        raise ContractError(f"unknown operator kind {kind!r}") from None


def time_reversal(F: SpinorField) -> SpinorField:
    """T = i sigma_2 C; anti-unitary with T^2 = -Id."""
    return SpinorField(F.patch, np.conj(F.psi2), -np.conj(F.psi1), F.pad)


def residual(A, B, extra: int = 2) -> float:
    """Max interior deviation of two fields of the same arity."""
    pad = max(A.pad, B.pad)
    if isinstance(A, SpinorField):
        a = SpinorField(A.patch, A.psi1, A.psi2, pad)
        b = SpinorField(B.patch, B.psi1, B.psi2, pad)
        return max(
            float(np.max(np.abs(a.component(i).interior(extra) - b.component(i).interior(extra))))
            for i in range(2))
    a = ScalarField(A.patch, A.values, pad)
    b = ScalarField(B.patch, B.values, pad)
    return float(np.max(np.abs(a.interior(extra) - b.interior(extra))))


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def square_identity_check(F: SpinorField, k: int) -> float:
    """Residual of D_k^2 = diag(-Delta_k - c, -Delta_{k-2} - c), c = (k/2)(1-k/2)."""
    c = (k / 2.0) * (1.0 - k / 2.0)
    lhs = op_dirac(op_dirac(F, k), k)
    r1 = op_delta(F.component(0), k)
    r2 = op_delta(F.component(1), k - 2)
    rhs = SpinorField(F.patch, -r1.values - c * F.psi1, -r2.values - c * F.psi2,
                      max(r1.pad, F.pad))
    return residual(lhs, rhs)


def _dirac_at_points(f1, f2, zx, zy, k: int, h: float):
    """(D_k F)(z) for analytic component callables, by local stencils.

    zx, zy are arrays of evaluation points; five-point cross stencils of
    step h are evaluated analytically around each point.
    """
    w = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    offs = np.array([-2.0, -1.0, 1.0, 2.0])

    def deriv(fn, axis):
        acc = 0.0
        for o, ww in zip(offs, w):
            if axis == 0:
                acc = acc + ww * fn(zx + o * h, zy)
            else:
                acc = acc + ww * fn(zx, zy + o * h)
        return acc / h

    k1 = 1j * zy * deriv(f2, 0) + zy * deriv(f2, 1) + ((k - 2) / 2.0) * f2(zx, zy)
    l1 = 1j * zy * deriv(f1, 0) - zy * deriv(f1, 1) + (k / 2.0) * f1(zx, zy)
    return 1j * k1, -1j * l1


def transformation_check(f1, f2, g, k: int, patch: GridPatch | None = None) -> float:
    """Residual of (D_k F) o gamma = J_gamma(., k) D_k [J_gamma^{-1} (F o gamma)].

    F is given by analytic component callables so both sides can be
    finite-differenced: the right side on the regular patch, the left by
    local stencils at the transported points.
    """
    if patch is None:
        patch = GridPatch()
    x = patch.x[None, :]
    y = patch.y[:, None]
    z = x + 1j * y
    denom = g.c * z + g.d
    gz = (g.a * z + g.b) / denom
    theta = np.angle(denom)

    jk = np.exp(1j * k * theta)
    jk2 = np.exp(1j * (k - 2) * theta)
    G = SpinorField(patch, f1(gz.real, gz.imag) / jk, f2(gz.real, gz.imag) / jk2)
    rhs = op_dirac(G, k)
    rhs = SpinorField(patch, jk * rhs.psi1, jk2 * rhs.psi2, rhs.pad)

    lz1, lz2 = _dirac_at_points(lambda a, b: f1(a, b), lambda a, b: f2(a, b),
                                gz.real, gz.imag, k, patch.hx)
    lhs = SpinorField(patch, lz1, lz2, 0)
    return residual(lhs, rhs)


def chiral_check(F: SpinorField, k: int) -> float:
    """Anticommutation with gamma_5 = diag(1,-1); structural, near-exact."""
    g5F = SpinorField(F.patch, F.psi1, -F.psi2, F.pad)
    a = op_dirac(g5F, k)
    b = op_dirac(F, k)
    anti = SpinorField(F.patch, a.psi1 + b.psi1, a.psi2 - b.psi2, a.pad)
    zero = SpinorField(F.patch, np.zeros_like(F.psi1), np.zeros_like(F.psi2), a.pad)
    return residual(anti, zero)


def time_reversal_check(F: SpinorField, k: int) -> float:
    """Residual of T D_k - D_{2-k} T; the intertwining is exact at symbol level."""
    lhs = time_reversal(op_dirac(F, k))
    rhs = op_dirac(time_reversal(F), 2 - k)
    return residual(lhs, rhs)


# ladder operators between weights k and k+2 at spectral parameters
# rho (weight k) and rho' with rho'^2 = rho^2 + k, sgn rho' = sgn rho

def _rho_raised(rho: float, k: int) -> float:
    val = rho * rho + k
    if val <= 0:
        raise ContractError(f"rho'^2 = rho^2 + k = {val} not positive")
    return float(np.sign(rho) * np.sqrt(val))


def ladder_raise(F: SpinorField, k: int, rho: float) -> SpinorField:
    """A_k^dagger = [[rho' K_k, 0], [i k, rho K_{k-2}]]: weight k -> k+2."""
    rp = _rho_raised(rho, k)
    top = op_k(F.component(0), k)
    bot = op_k(F.component(1), k - 2)
    return SpinorField(F.patch, rp * top.values,
                       1j * k * F.psi1 + rho * bot.values, top.pad)


def ladder_lower(F: SpinorField, k: int, rho: float) -> SpinorField:
    """A_{k+2} = -[[rho' Lam_{k+2}, i k], [0, rho Lam_k]]: weight k+2 -> k."""
    rp = _rho_raised(rho, k)
    top = op_lam(F.component(0), k + 2)
    bot = op_lam(F.component(1), k)
    return SpinorField(F.patch, -rp * top.values - 1j * k * F.psi2,
                       -rho * bot.values, top.pad)


def planted_spinor(patch: GridPatch, k: int, rho: float) -> SpinorField:
    """Analytic eigen-family Psi = (rho psi, i Lam_k psi), psi = y^s.

    s is chosen so s(1-s) = rho^2 + (k/2)(1-k/2); then D_k Psi = -rho Psi
    exactly.  The second component i Lam_k psi = i (k/2 - s) y^s is
    sampled analytically.
    """
    disc = ((k - 1) / 2.0) ** 2 - rho * rho
    s = 0.5 + np.sqrt(complex(disc))
    f1 = lambda x, y: rho * (y + 0j) ** s * np.ones_like(x)
    f2 = lambda x, y: 1j * (k / 2.0 - s) * (y + 0j) ** s * np.ones_like(x)
    return SpinorField.from_functions(patch, f1, f2)


def ladder_check(k: int, rho: float, patch: GridPatch | None = None) -> dict:
    """Planted-eigenfamily intertwining residuals of the raising operator.

    'forward': (D_k + rho) Psi for the planted Psi;
    'raised':  (D_{k+2} + rho') A_k^dagger Psi.
    """
    if rho == 0.0:
        raise ContractError("ladder_check needs rho != 0")
    if patch is None:
        patch = GridPatch()
    F = planted_spinor(patch, k, rho)
    dF = op_dirac(F, k)
    fwd = SpinorField(patch, dF.psi1 + rho * F.psi1, dF.psi2 + rho * F.psi2, dF.pad)
    zero = SpinorField(patch, np.zeros_like(F.psi1), np.zeros_like(F.psi2), dF.pad)
    forward = residual(fwd, zero)

    rp = _rho_raised(rho, k)
    up = ladder_raise(F, k, rho)
    dup = op_dirac(up, k + 2)
    res = SpinorField(patch, dup.psi1 + rp * up.psi1, dup.psi2 + rp * up.psi2, dup.pad)
    zero2 = SpinorField(patch, np.zeros_like(F.psi1), np.zeros_like(F.psi2), dup.pad)
    raised = residual(res, zero2)
    return {"forward": forward, "raised": raised}


def _chain_parameters(rho0: float, m: int):
    """Eigenvalue chain rho_t at weight 2t+1: rho_t^2 = rho_0^2 + t^2."""
    return [float(np.sign(rho0) * np.sqrt(rho0 * rho0 + t * t)) for t in range(m + 1)]


def s_composed(F: SpinorField, m: int, rho0: float) -> SpinorField:
    """S_{2m+1} as B^dag_{2m-1} ... B^dag_1 T C_3 ... C_{2m+1}.

    B^dag_k = (1/rho) A^dag_k and C_k = (1/rho') A_k carry the normalizing
    eigenvalue of their input space; the composite is rho-independent as a
    differential operator, which is what the three-way check verifies.
    """
    rhos = _chain_parameters(rho0, m)
    out = F
    for t in range(m, 0, -1):  # C_{2t+1}: weight 2t+1 -> 2t-1
        k = 2 * t - 1
        out = ladder_lower(out, k, rhos[t - 1])
        out = SpinorField(out.patch, out.psi1 / rhos[t], out.psi2 / rhos[t], out.pad)
    out = time_reversal(out)
    for t in range(0, m):  # B^dag_{2t+1}: weight 2t+1 -> 2t+3
        k = 2 * t + 1
        out = ladder_raise(out, k, rhos[t])
        out = SpinorField(out.patch, out.psi1 / rhos[t], out.psi2 / rhos[t], out.pad)
    return out


def s_explicit(F: SpinorField, m: int) -> SpinorField:
    """S_{2m+1} = T diag(Lam_{-2m+3}...Lam_{2m+1}, Lam_{-2m+1}...Lam_{2m-1})."""
    top = F.component(0)
    for j in range(2 * m + 1, -2 * m + 1, -2):
        top = op_lam(top, j)
    bot = F.component(1)
    for j in range(2 * m - 1, -2 * m - 1, -2):
        bot = op_lam(bot, j)
    pad = max(top.pad, bot.pad)
    return time_reversal(SpinorField(F.patch, top.values, bot.values, pad))


def s_operator_check(F: SpinorField, m: int, rho1: float, rho2: float) -> float:
    """Max pairwise residual of the composed forms at rho1, rho2 and the
    explicit Lambda-product form, all applied to the same field."""
    a = s_composed(F, m, rho1)
    b = s_composed(F, m, rho2)
    c = s_explicit(F, m)
    return max(residual(a, b), residual(a, c), residual(b, c))


def scalar_s_check(m: int, s_exp: complex, patch: GridPatch | None = None) -> float:
    """Weight-stepping bookkeeping of C Lam_{-2m+1} ... Lam_{2m+1} on y^s.

    Each Lam_j acts on y^s as (j/2 - s); the chain must reproduce the
    conjugated product exactly (up to stencil error).
    """
    if patch is None:
        patch = GridPatch()
    f = ScalarField.from_function(patch, lambda x, y: (y + 0j) ** s_exp * np.ones_like(x))
    out = f
    coeff = 1.0 + 0j
    for j in range(2 * m + 1, -2 * m - 1, -2):
        out = op_lam(out, j)
        coeff *= (j / 2.0 - s_exp)
    out = ScalarField(patch, np.conj(out.values), out.pad)
    target = ScalarField.from_function(
        patch, lambda x, y: np.conj(coeff * (y + 0j) ** s_exp) * np.ones_like(x))
    target = ScalarField(patch, target.values, out.pad)
    return residual(out, target)


def weight_shift_check(k: int, s_exp: complex, patch: GridPatch | None = None) -> dict:
    """K_k raises weight two without changing the Maass eigenvalue.

    psi = y^s has -Delta_k psi = s(1-s) psi for every k.  'raised' is the
    residual of (-Delta_{k+2} - lambda) K_k psi; 'returned' compares the
    round trip Lam_{k+2} K_k psi against its closed form
    (s + k/2)((k+2)/2 - s) y^s and re-checks the eigen-equation on the
    analytic return field (nesting a second-order stencil on two layers
    of first-order output only amplifies rounding noise).

    The default step here is coarser than the patch default: a
    second-order stencil applied to first-order output has its
    truncation/rounding optimum near h = 5e-3.
    """
    if patch is None:
        patch = GridPatch(hx=5e-3, hy=5e-3)
    lam = s_exp * (1.0 - s_exp)
    psi = ScalarField.from_function(patch, lambda x, y: (y + 0j) ** s_exp * np.ones_like(x))
    up = op_k(psi, k)
    r1 = op_delta(up, k + 2)
    res1 = ScalarField(patch, -r1.values - lam * up.values, r1.pad)
    zero1 = ScalarField(patch, np.zeros_like(psi.values), r1.pad)

    back = op_lam(up, k + 2)
    coeff = (s_exp + k / 2.0) * ((k + 2) / 2.0 - s_exp)
    target = ScalarField(patch, coeff * psi.values, back.pad)
    returned = residual(back, target)
    analytic_back = ScalarField(patch, coeff * psi.values, 0)
    r2 = op_delta(analytic_back, k)
    res2 = ScalarField(patch, -r2.values - lam * analytic_back.values, r2.pad)
    zero2 = ScalarField(patch, np.zeros_like(psi.values), r2.pad)
    return {"raised": residual(res1, zero1),
            "returned": max(returned, residual(res2, zero2))}


def special_eigenvalues(k: int, genus: int):
    """Exact special eigenvalues lambda_j = ((k-2j)/2)(1-(k-2j)/2) with
    multiplicities (g-1)(k-2j-1), j = 0..floor((k-1)/2); needs k >= 2."""
    if k < 2:
        raise ContractError("special eigenvalues exist only for k >= 2")
    if genus < 2:
        raise ContractError("genus must be >= 2")
    out = []
    for j in range((k - 1) // 2 + 1):
        w = Fraction(k - 2 * j, 2)
        lam = w * (1 - w)
        mult = (genus - 1) * (k - 2 * j - 1)
        if mult > 0:  # at odd k the top j carries formula multiplicity 0
            out.append((lam, mult))
    return out


def magnetic_field(k: int) -> float:
    """Field strength (k-1)/2 in units e = 1; zero exactly at k = 1."""
    return (k - 1) / 2.0


def gram_independence(F: SpinorField, G: SpinorField) -> float:
    """Normalized 2x2 Gram determinant of two spinor fields (interior L2).

    Positive and O(1) for linearly independent pairs, 0 for dependent.
    """
    pad = max(F.pad, G.pad) + 2
    y = F.patch.y[:, None]
    wgt = 1.0 / (y * y)

    def ip(A, B):
        s = 0.0 + 0j
        for ca, cb in ((A.psi1, B.psi1), (A.psi2, B.psi2)):
            s += np.sum(np.conj(ca[pad:-pad, pad:-pad]) * cb[pad:-pad, pad:-pad]
                        * wgt[pad:-pad, :])
        return s * F.patch.hx * F.patch.hy

    gff, ggg, gfg = ip(F, F).real, ip(G, G).real, ip(F, G)
    det = gff * ggg - abs(gfg) ** 2
    return float(det / (gff * ggg)) if gff > 0 and ggg > 0 else 0.0
