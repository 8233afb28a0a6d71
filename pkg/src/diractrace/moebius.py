"""Moebius geometry on the upper half-plane.

Unit-determinant 2x2 real matrices acting by fractional linear
transformations, hyperbolic distance, the weight-k phase factors of
automorphy, and the point-pair prefactor matrices.

Branch conventions (load-bearing, see `factor_j` and `pair_products`):
the weight-k factor is e^{i k arg(cz+d)}, which is exactly multiplicative
for integer k, and the four prefactor entry products are evaluated as
single global-branch expressions so that kernel equivariance holds
without sign glitches anywhere on H^2 x H^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, ContractError, SingularPairError

__all__ = [
    "GroupElement",
    "Point",
    "Weight",
    "compose",
    "moebius_act",
    "hyperbolic_distance",
    "sigma_invariant",
    "classify_and_length",
    "factor_j",
    "factor_J",
    "pair_products",
    "pair_matrices",
]

# det renormalization thresholds for long composition chains
_DET_RESCALE = 1e-9
_DET_REJECT = 1e-6
_PARABOLIC_TOL = 1e-10


@dataclass(frozen=True)
class Weight:
    """Integer weight of the Maass/Dirac operator family."""

    k: int

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)):
            raise ContractError(f"weight must be an integer, got {self.k!r}")


def _weight_value(k) -> int:
    return k.k if isinstance(k, Weight) else int(k)


@dataclass(frozen=True)
class Point:
    """Point x + iy of the upper half-plane, y > 0 strictly."""

    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0.0) or not np.isfinite(self.x) or not np.isfinite(self.y):
            raise ContractError(f"point must have finite coordinates with y > 0, got {self}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "Point":
        return cls(float(np.real(z)), float(np.imag(z)))


@dataclass(frozen=True)
class GroupElement:
    """Element of SL(2,R), renormalized to det 1 on construction."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not np.isfinite(det) or abs(det - 1.0) > _DET_REJECT:
            raise ContractError(f"determinant {det} too far from 1 to renormalize")
        if abs(det - 1.0) > _DET_RESCALE:
            s = 1.0 / np.sqrt(det)
            object.__setattr__(self, "a", self.a * s)
            object.__setattr__(self, "b", self.b * s)
            object.__setattr__(self, "c", self.c * s)
            object.__setattr__(self, "d", self.d * s)

    # -- constructors ---------------------------------------------------

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def boost(cls, length: float) -> "GroupElement":
        """Hyperbolic translation by `length` along the imaginary axis."""
        return cls(np.exp(length / 2.0), 0.0, 0.0, np.exp(-length / 2.0))

    @classmethod
    def rotation(cls, phi: float) -> "GroupElement":
        """Rotation about i by angle phi."""
        ch, sh = np.cos(phi / 2.0), np.sin(phi / 2.0)
        return cls(ch, sh, -sh, ch)

    @classmethod
    def from_matrix(cls, m) -> "GroupElement":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    # -- structure ------------------------------------------------------

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.a, -self.b, -self.c, -self.d)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return compose(self, other)

    def act(self, z: Point) -> Point:
        return moebius_act(self, z)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """Matrix product g1 g2, renormalized to det 1."""
    return GroupElement(
        g1.a * g2.a + g1.b * g2.c,
        g1.a * g2.b + g1.b * g2.d,
        g1.c * g2.a + g1.d * g2.c,
        g1.c * g2.b + g1.d * g2.d,
    )


def moebius_act(g: GroupElement, z: Point) -> Point:
    """Fractional linear action z -> (az+b)/(cz+d)."""
    w = (g.a * z.z + g.b) / (g.c * z.z + g.d)
    return Point.from_complex(w)


def hyperbolic_distance(z1: Point, z2: Point) -> float:
    """Distance in the metric y^-2 (dx^2 + dy^2)."""
    arg = 1.0 + abs(z1.z - z2.z) ** 2 / (2.0 * z1.y * z2.y)
    return float(np.arccosh(arg))


def sigma_invariant(z1: Point, z2: Point) -> float:
    """Kernel argument (cosh d(z1,z2) + 1)/2 >= 1."""
    coshd = 1.0 + abs(z1.z - z2.z) ** 2 / (2.0 * z1.y * z2.y)
    return (coshd + 1.0) / 2.0


def classify_and_length(g: GroupElement):
    """Classify g and return (kind, length).

    kind is one of 'identity', 'elliptic', 'parabolic', 'hyperbolic';
    length is 2 arccosh(|tr|/2) for hyperbolic g and None otherwise.
    Elements within 1e-10 of |tr| = 2 are classified parabolic (and
    rejected downstream: the groups handled here are strictly hyperbolic).
    """
    m = g.matrix
    if min(np.max(np.abs(m - np.eye(2))), np.max(np.abs(m + np.eye(2)))) < 1e-12:
        return "identity", None
    t = abs(g.trace)
    if t > 2.0 + _PARABOLIC_TOL:
        return "hyperbolic", float(2.0 * np.arccosh(t / 2.0))
    if t > 2.0 - _PARABOLIC_TOL:
        return "parabolic", None
    return "elliptic", None


def translation_length(g: GroupElement) -> float:
    """Geodesic length of the hyperbolic element g; errors otherwise."""
    kind, length = classify_and_length(g)
    if kind != "hyperbolic":
        raise ClassificationError(f"length requested for {kind} element (tr = {g.trace:.6g})")
    return length


def factor_j(g: GroupElement, z: Point, k) -> complex:
    """Weight-k factor of automorphy e^{i k arg(cz+d)}.

    For integer k this equals the ratio of half-powers
    (cz+d)^{k/2} / (c conj(z)+d)^{k/2} and is exactly multiplicative:
    arg(c3 z + d3) = arg(c1 g2 z + d1) + arg(c2 z + d2) mod 2 pi under
    composition, so no branch tracking is needed.
    """
    kk = _weight_value(k)
    return complex(np.exp(1j * kk * np.angle(g.c * z.z + g.d)))


def factor_J(g: GroupElement, z: Point, k) -> np.ndarray:
    """Spinor factor diag(j(z,k), j(z,k-2))."""
    kk = _weight_value(k)
    th = np.angle(g.c * z.z + g.d)
    return np.diag([np.exp(1j * kk * th), np.exp(1j * (kk - 2) * th)])


def pair_products(z1: Point | complex, z2: Point | complex):
    """Unit-modulus prefactor entry products (P11, P12, P21, P22).

    These are the products A_i B_j entering the point-pair kernel
    K_ij = -i A_i Phi_ij B_j, with z1 in the primed slot.  Writing
    p = z1 - z2, r = z2 - conj(z1), q = z1 - conj(z2):

        P11 = sqrt(r/q)             (principal; r, q lie in the upper
        P22 = sqrt(q/r)              half-plane so the ratio never meets
                                     the branch cut)
        P12 = i conj(p)/|p|          (global branch of sqrt((conj p)/(-p));
        P21 = -i p/|p|               the ratio winds twice, so a continuous
                                     square root exists and is unique up to
                                     a constant sign fixed on the imaginary
                                     axis where all products equal 1)

    This choice makes the transformation law of the kernel exact for every
    element of SL(2,R); the principal-branch off-diagonal quotients flip
    sign on half the domain and are not used.
    """
    w1 = z1.z if isinstance(z1, Point) else complex(z1)
    w2 = z2.z if isinstance(z2, Point) else complex(z2)
    p = w1 - w2
    ap = abs(p)
    if ap == 0.0:
        raise SingularPairError("pair prefactors are singular at coincident points")
    r = w2 - np.conj(w1)
    q = w1 - np.conj(w2)
    p11 = np.sqrt(r / q)
    return p11, 1j * np.conj(p) / ap, -1j * p / ap, 1.0 / p11


def pair_matrices(z1: Point, z2: Point):
    """Diagonal prefactor matrices (A, B) with the canonical products.

    Individual half-power entries are branch-ambiguous; only the products
    A_i B_j are canonical.  The normalization here puts B_11 = 1 and
    reproduces exactly the products of `pair_products`.
    """
    p11, p12, p21, p22 = pair_products(z1, z2)
    A = np.diag([p11, p21])
    B = np.diag([1.0 + 0j, p12 / p11])
    return A, B
