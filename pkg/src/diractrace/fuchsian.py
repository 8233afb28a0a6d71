"""Surface groups, multiplier systems, and geodesic length spectra.

The enumeration core works with PSL representatives normalized to
positive trace (valid in a strictly hyperbolic group, where no trace
vanishes).  Two interchangeable methods produce the spectrum:

* ``brute``: breadth-first word enumeration up to a word-length cap,
  with element-level dedup and per-class conjugation closure.
* ``pruned``: displacement-bounded ball search.  Every conjugacy class
  of length l has a representative with cosh(d(o, gamma o)/2) <=
  cosh(l/2) cosh(R), R the Dirichlet circumradius about the basepoint
  o = i, and every ball element is reachable through ball elements by
  right multiplication with the side pairings (distance-reduction
  argument), so a layered BFS with the displacement filter is complete.

Conjugacy classes are the connected components of the ball subset under
conjugation by the generators; components are extracted by min-label
propagation, which also absorbs the rare duplicate records caused by
float quantization at cell boundaries.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BudgetError,
    CacheError,
    ContractError,
    PresentationError,
    SpinStructureError,
)
from .moebius import GroupElement, translation_length

__all__ = [
    "Word",
    "SurfacePresentation",
    "MultiplierSystem",
    "GeodesicClass",
    "LengthSpectrum",
    "build_bolza",
    "regular_presentation",
    "load_presentation",
    "presentation_config",
    "build_multiplier",
    "evaluate_chi",
    "enumerate_geodesics",
    "primitive_decompose",
    "group_ball",
    "chi_of_ball",
    "contains",
    "save_spectrum",
    "load_spectrum",
    "spectrum_fingerprint",
]

_QUANT = 1e-6          # dedup grid for matrix entries
_FLIP_BIT = np.uint32(1) << np.uint32(31)
_CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    """Word in the generators: signed 1-based letters, +j = g_{j-1}."""

    letters: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def free_reduce(self) -> "Word":
        out: list[int] = []
        for s in self.letters:
            if out and out[-1] == -s:
                out.pop()
            else:
                out.append(s)
        return Word(tuple(out))

    def cyclic_reduce(self) -> "Word":
        w = list(self.free_reduce().letters)
        while len(w) >= 2 and w[0] == -w[-1]:
            w = w[1:-1]
        return Word(tuple(w))

    def inverse(self) -> "Word":
        return Word(tuple(-s for s in reversed(self.letters)))

    def parity_vector(self, genus: int) -> tuple[int, ...]:
        e = [0] * (2 * genus)
        for s in self.letters:
            e[abs(s) - 1] ^= 1
        return tuple(e)

    def is_power(self, n: int) -> bool:
        w = self.cyclic_reduce().letters
        if n <= 1 or len(w) % n:
            return False
        block = len(w) // n
        return all(w[i] == w[i % block] for i in range(len(w)))

    def __str__(self) -> str:
        return " ".join(str(s) for s in self.letters)

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        return cls(tuple(int(t) for t in text.split()) if text else ())


# ---------------------------------------------------------------------------
# presentations and multiplier systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfacePresentation:
    """Genus >= 2 surface group with hyperbolic generators."""

    genus: int
    generators: tuple[GroupElement, ...]
    relator: Word
    area: float
    circumradius: float | None = None
    relator_sign: int = +1
    name: str = ""

    @property
    def min_generator_length(self) -> float:
        return min(translation_length(g) for g in self.generators)


def _validate_presentation(genus, generators, relator, circumradius, name) -> SurfacePresentation:
    if genus < 2:
        raise PresentationError(f"genus must be >= 2, got {genus}")
    if len(generators) != 2 * genus:
        raise PresentationError(f"expected {2 * genus} generators, got {len(generators)}")
    for idx, g in enumerate(generators):
        if abs(g.trace) <= 2.0 + 1e-10:
            raise PresentationError(
                f"generator {idx} is not hyperbolic (|tr| = {abs(g.trace):.6g})")
    m = np.eye(2)
    for s in relator.letters:
        g = generators[abs(s) - 1]
        m = m @ (g.matrix if s > 0 else g.inverse().matrix)
    dev_plus = np.max(np.abs(m - np.eye(2)))
    dev_minus = np.max(np.abs(m + np.eye(2)))
    if min(dev_plus, dev_minus) > 1e-8:
        raise PresentationError(f"relator is not +-Id (deviation {min(dev_plus, dev_minus):.3e})")
    sign = +1 if dev_plus <= dev_minus else -1
    area = 4.0 * np.pi * (genus - 1)
    return SurfacePresentation(genus, tuple(generators), relator, area,
                               circumradius, sign, name)


def build_bolza() -> SurfacePresentation:
    """Regular-octagon genus-2 group (four rotated copies of one boost)."""
    return regular_presentation(2, name="bolza")


def regular_presentation(genus: int, name: str = "") -> SurfacePresentation:
    """Surface group of the regular 4g-gon with a single vertex cycle.

    Generators are boosts of equal length along axes through i at angles
    j pi/(2g); the circumradius of the Dirichlet domain about i is
    arccosh(cot^2(pi/4g)).
    """
    ng = 2 * genus
    circ = float(np.arccosh(1.0 / np.tan(np.pi / (4 * genus)) ** 2))
    length = 2.0 * float(np.arcsinh(np.sinh(circ) * np.sin(np.pi / (4 * genus))))
    gens = []
    for j in range(ng):
        rot = GroupElement.rotation(j * np.pi / ng)
        gens.append(rot @ GroupElement.boost(length) @ rot.inverse())
    letters = [(j + 1) if j % 2 == 0 else -(j + 1) for j in range(ng)]
    letters += [-abs(s) if s > 0 else abs(s) for s in letters[:ng]]
    relator = Word(tuple(letters))
    return _validate_presentation(genus, gens, relator, circ, name or f"regular-{4 * genus}-gon")


@dataclass(frozen=True)
class MultiplierSystem:
    """Real unitary character: signs on the generators, chi(-Id) = (-1)^k."""

    signs: tuple[int, ...]
    weight_parity: int


def build_multiplier(signs, k: int, presentation: SurfacePresentation) -> MultiplierSystem:
    """Build and consistency-check a real multiplier system of weight k.

    The relator has even exponent sums, so chi(relator word) = +1 for any
    sign choice; consistency of chi(-Id) = (-1)^k with the SL lift demands
    relator lift = +Id whenever k is odd.
    """
    signs = tuple(int(s) for s in signs)
    if len(signs) != 2 * presentation.genus:
        raise SpinStructureError(
            f"need {2 * presentation.genus} signs, got {len(signs)}")
    if any(s not in (1, -1) for s in signs):
        raise SpinStructureError("signs must be +-1")
    parity = int(k) % 2
    if any(presentation.relator.parity_vector(presentation.genus)):
        raise SpinStructureError("relator exponent sums are not all even")
    if parity == 1 and presentation.relator_sign == -1:
        raise SpinStructureError(
            "inconsistent spin structure: relator lift is -Id but the weight is odd")
    return MultiplierSystem(signs, parity)


def evaluate_chi(ms: MultiplierSystem, w: Word) -> int:
    """chi(w) from the mod-2 exponent sums of the word."""
    val = 1
    e = [0] * len(ms.signs)
    for s in w.letters:
        e[abs(s) - 1] ^= 1
    for s, parity in zip(ms.signs, e):
        if parity and s < 0:
            val = -val
    return val


# ---------------------------------------------------------------------------
# hashed, quantized element keys
# ---------------------------------------------------------------------------

def _hash_mats(mats: np.ndarray) -> np.ndarray:
    """64-bit mixed hash of the 1e-6-quantized entries of (N,2,2) matrices.

    Distinct group elements at these scales differ by >> 1e-4 in some
    entry, so cell collisions between distinct elements cannot occur; the
    residual 64-bit birthday risk is ~1e-4 at 1e7 elements and only ever
    costs a single dropped representative.
    """
    q = np.rint(mats.reshape(-1, 4) / _QUANT).astype(np.int64).view(np.uint64)
    h = np.zeros(len(q), dtype=np.uint64)
    for j in range(4):
        x = q[:, j].copy()
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
        h = h * np.uint64(0x100000001B3) ^ x
    return h


def _displacement2(mats: np.ndarray) -> np.ndarray:
    """2 cosh d(i, gamma i) = a^2 + b^2 + c^2 + d^2 for det-1 matrices."""
    return np.einsum("nij,nij->n", mats, mats)


def _right_products(cm: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """(n,2,2) x (m,2,2) -> (n*m,2,2) right products, generator-major last.

    The generators are compile-time constants per call, so the products
    are eight scalar-broadcast multiply-adds per generator; much faster
    than a batched einsum over tiny matrices.
    """
    n, m = cm.shape[0], gens.shape[0]
    out = np.empty((n, m, 2, 2))
    a, b, c, d = cm[:, 0, 0], cm[:, 0, 1], cm[:, 1, 0], cm[:, 1, 1]
    for gi in range(m):
        e, f, g, h = gens[gi].ravel()
        out[:, gi, 0, 0] = a * e + b * g
        out[:, gi, 0, 1] = a * f + b * h
        out[:, gi, 1, 0] = c * e + d * g
        out[:, gi, 1, 1] = c * f + d * h
    return out.reshape(-1, 2, 2)


def _conjugate_by(g: np.ndarray, mats: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """g M g^{-1} for constant g over a batch of matrices."""
    e, f, gg, hh = g.ravel()
    ei, fi, gi, hi = ginv.ravel()
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    ta, tb = e * a + f * c, e * b + f * d
    tc, td = gg * a + hh * c, gg * b + hh * d
    out = np.empty_like(mats)
    out[:, 0, 0] = ta * ei + tb * gi
    out[:, 0, 1] = ta * fi + tb * hi
    out[:, 1, 0] = tc * ei + td * gi
    out[:, 1, 1] = tc * fi + td * hi
    return out


# ---------------------------------------------------------------------------
# ball BFS
# ---------------------------------------------------------------------------

@dataclass
class GroupBall:
    """Kept group elements from a displacement-bounded BFS, tr > 0 lifts.

    With no filter this is the whole ball {d(i, gamma i) <= dmax}; the
    length-filtered mode used by the spectrum pipeline keeps only the
    hyperbolic elements below the length cutoff (the full ball exists
    transiently as dedup keys during the search).  `global_index` maps
    kept elements to BFS discovery order, through which the optional
    parent/letter arrays reconstruct words.
    """

    mats: np.ndarray              # (N,2,2) float64, kept elements
    parity: np.ndarray            # (N,) uint32: low bits = exponent parity, bit 31 = lift flip
    keys: np.ndarray              # (N,) uint64 in storage order
    sorted_keys: np.ndarray       # keys sorted
    sort_order: np.ndarray        # argsort(keys)
    dmax: float
    gens: np.ndarray              # (m,2,2) generator matrices (gens then inverses)
    gen_parity: np.ndarray        # (m,) uint32
    total_count: int = 0          # elements discovered in the full ball
    global_index: np.ndarray | None = None
    parents: np.ndarray | None = None
    letters: np.ndarray | None = None

    def lookup(self, mats: np.ndarray) -> np.ndarray:
        """Indices of the given (already tr>0-normalized) matrices, -1 if absent."""
        h = _hash_mats(mats)
        pos = np.searchsorted(self.sorted_keys, h)
        pos = np.clip(pos, 0, len(self.sorted_keys) - 1)
        hit = self.sorted_keys[pos] == h
        return np.where(hit, self.sort_order[pos], -1)

    def word_of(self, idx: int) -> Word | None:
        """Word of the kept element idx, walking BFS parents; None if unset."""
        if self.parents is None:
            return None
        gidx = int(self.global_index[idx]) if self.global_index is not None else idx
        letters = []
        while gidx > 0:
            letters.append(int(self.letters[gidx]))
            gidx = int(self.parents[gidx])
        ng = len(self.gens) // 2
        signed = [(s + 1) if s < ng else -(s - ng + 1) for s in reversed(letters)]
        return Word(tuple(signed))


class _KeySegments:
    """Sorted uint64 key set as LSM-style segments with lazy consolidation."""

    def __init__(self, first: np.ndarray):
        self.segments = [np.sort(first)]
        self.since_merge = 0
        self.total = len(first)

    def contains(self, keys: np.ndarray) -> np.ndarray:
        out = np.zeros(len(keys), dtype=bool)
        for seg in self.segments:
            if len(seg):
                pos = np.clip(np.searchsorted(seg, keys), 0, len(seg) - 1)
                out |= seg[pos] == keys
        return out

    def add_sorted(self, keys: np.ndarray) -> None:
        self.segments.append(keys)
        self.total += len(keys)
        self.since_merge += len(keys)
        if len(self.segments) > 6 or self.since_merge > self.total // 2:
            merged = np.sort(np.concatenate(self.segments))
            self.segments = [merged]
            self.since_merge = 0


def _generator_arrays(p: SurfacePresentation):
    ng = len(p.generators)
    gens = np.empty((2 * ng, 2, 2))
    gp = np.empty(2 * ng, dtype=np.uint32)
    for j, g in enumerate(p.generators):
        gens[j] = g.matrix
        gens[ng + j] = g.inverse().matrix
        gp[j] = gp[ng + j] = np.uint32(1) << np.uint32(j)
    return gens, gp


def group_ball(p: SurfacePresentation, dmax: float, budget: int = 10_000_000,
               store_words: bool | None = None, max_word_len: int | None = None,
               length_cap: float | None = None) -> GroupBall:
    """Layered BFS over the group, keeping displacement <= dmax.

    With max_word_len set, the word length is capped as well (this is the
    brute-force mode; dmax may then be np.inf).  With length_cap set,
    only hyperbolic elements of translation length <= length_cap are
    stored (the full ball lives transiently as dedup keys), which is what
    the spectrum pipeline needs and what keeps large cutoffs in memory.
    Frontiers of very large balls spill to disk; each block is written
    once and read once.  The hard budget guards against runaway cutoffs.
    """
    import os
    import tempfile

    gens, gp = _generator_arrays(p)
    m = len(gens)
    thresh = 2.0 * np.cosh(dmax) + 1e-9 if np.isfinite(dmax) else np.inf
    est = np.exp(dmax) / 4.0 if np.isfinite(dmax) else 0.0
    if np.isfinite(dmax) and est > 4.0 * budget:
        raise BudgetError(
            f"estimated ball size {est:.2e} far exceeds budget {budget:.2e}")
    if store_words is None:
        store_words = est < 3e7 if np.isfinite(dmax) else True
    tr_cap = 2.0 * np.cosh(length_cap / 2.0) + 1e-9 if length_cap is not None else None

    spill_dir = tempfile.TemporaryDirectory(prefix="diractrace-bfs-") \
        if est > 1.5e7 else None
    spill_count = 0

    def _pack(nm, npar, idx):
        nonlocal spill_count
        if spill_dir is None or nm.shape[0] < 100000:
            return ("mem", nm, npar, idx)
        path = os.path.join(spill_dir.name, f"b{spill_count}.npz")
        spill_count += 1
        if idx is None:
            np.savez(path, m=nm, p=npar)
        else:
            np.savez(path, m=nm, p=npar, i=idx)
        return ("disk", path)

    def _unpack(entry):
        if entry[0] == "mem":
            return entry[1], entry[2], entry[3]
        with np.load(entry[1]) as z:
            nm, npar = z["m"], z["p"]
            idx = z["i"] if "i" in z.files else None
        os.remove(entry[1])
        return nm, npar, idx

    eye = np.eye(2)[None, :, :]
    eye_key = _hash_mats(eye)
    seen = _KeySegments(eye_key)
    kept_mats, kept_par, kept_keys, kept_gidx = [], [], [], []
    if length_cap is None:
        kept_mats.append(eye)
        kept_par.append(np.zeros(1, dtype=np.uint32))
        kept_keys.append(eye_key)
        kept_gidx.append(np.zeros(1, dtype=np.int64))
    parents = [np.full(1, -1, dtype=np.int64)] if store_words else None
    letters = [np.zeros(1, dtype=np.int16)] if store_words else None

    total = 1
    root_idx = np.zeros(1, dtype=np.int64) if store_words else None
    frontier_blocks = [("mem", eye, np.zeros(1, dtype=np.uint32), root_idx)]
    depth = 0
    chunk = 1 << 18

    while frontier_blocks:
        depth += 1
        if max_word_len is not None and depth > max_word_len:
            break
        new_blocks: list = []
        level_seen = _KeySegments(np.zeros(0, dtype=np.uint64))
        while frontier_blocks:
            fm, fp, fidx = _unpack(frontier_blocks.pop())
            for lo in range(0, fm.shape[0], chunk):
                cm = fm[lo:lo + chunk]
                cp = fp[lo:lo + chunk]
                prod = _right_products(cm, gens)
                par = (cp[:, None] ^ gp[None, :]).reshape(-1)
                if store_words:
                    pletter = np.broadcast_to(
                        np.arange(m, dtype=np.int16), (cm.shape[0], m)).reshape(-1)
                    pparent = np.repeat(fidx[lo:lo + chunk], m)
                tr = prod[:, 0, 0] + prod[:, 1, 1]
                neg = tr < 0
                prod[neg] *= -1.0
                par[neg] ^= _FLIP_BIT
                if np.isfinite(dmax):
                    keep = _displacement2(prod) <= thresh
                    prod, par = prod[keep], par[keep]
                    if store_words:
                        pparent, pletter = pparent[keep], pletter[keep]
                if not prod.shape[0]:
                    continue
                h = _hash_mats(prod)
                _, first = np.unique(h, return_index=True)
                prod, par, h = prod[first], par[first], h[first]
                if store_words:
                    pparent, pletter = pparent[first], pletter[first]
                fresh = ~seen.contains(h) & ~level_seen.contains(h)
                if not np.any(fresh):
                    continue
                order = np.argsort(h[fresh], kind="stable")
                nm = prod[fresh][order]
                npar = par[fresh][order]
                nk = h[fresh][order]
                idx = np.arange(total, total + nm.shape[0], dtype=np.int64) \
                    if store_words else None
                total += nm.shape[0]
                if total > budget:
                    raise BudgetError(
                        f"enumeration exceeded the element budget ({total} > {budget}); "
                        "raise the budget or lower the cutoff")
                level_seen.add_sorted(nk)
                if store_words:
                    parents.append(pparent[fresh][order])
                    letters.append(pletter[fresh][order])
                if length_cap is None:
                    kept_mats.append(nm)
                    kept_par.append(npar)
                    kept_keys.append(nk)
                    if store_words:
                        kept_gidx.append(idx)
                else:
                    trn = nm[:, 0, 0] + nm[:, 1, 1]
                    sel = (trn > 2.0 + 1e-10) & (trn <= tr_cap)
                    if np.any(sel):
                        kept_mats.append(nm[sel])
                        kept_par.append(npar[sel])
                        kept_keys.append(nk[sel])
                        if store_words:
                            kept_gidx.append(idx[sel])
                new_blocks.append(_pack(nm, npar, idx))
        for seg in level_seen.segments:
            if len(seg):
                seen.add_sorted(seg)
        frontier_blocks = new_blocks
    if spill_dir is not None:
        spill_dir.cleanup()

    if kept_mats:
        mats_all = np.concatenate(kept_mats)
        par_all = np.concatenate(kept_par)
        keys_all = np.concatenate(kept_keys)
    else:
        mats_all = np.zeros((0, 2, 2))
        par_all = np.zeros(0, dtype=np.uint32)
        keys_all = np.zeros(0, dtype=np.uint64)
    gidx_all = np.concatenate(kept_gidx) if kept_gidx else np.zeros(0, dtype=np.int64)
    if len(gidx_all) != len(mats_all):
        gidx_all = None
    order = np.argsort(keys_all, kind="stable")
    return GroupBall(
        mats=mats_all,
        parity=par_all,
        keys=keys_all,
        sorted_keys=keys_all[order],
        sort_order=order,
        dmax=float(dmax),
        gens=gens,
        gen_parity=gp,
        total_count=total,
        global_index=gidx_all,
        parents=np.concatenate(parents) if store_words else None,
        letters=np.concatenate(letters) if store_words else None,
    )


def chi_of_ball(ball: GroupBall, ms: MultiplierSystem) -> np.ndarray:
    """chi evaluated on the positive-trace lift of every ball element."""
    bits = ball.parity & np.uint32(0x7FFFFFFF)
    neg_mask = np.uint32(0)
    for j, s in enumerate(ms.signs):
        if s < 0:
            neg_mask |= np.uint32(1) << np.uint32(j)
    odd = np.bitwise_count(bits & neg_mask).astype(np.int64)
    if ms.weight_parity:
        odd += (ball.parity >> np.uint32(31)).astype(np.int64)
    return np.where(odd % 2, -1.0, 1.0)


# ---------------------------------------------------------------------------
# membership by distance reduction
# ---------------------------------------------------------------------------

def reduce_to_domain(p: SurfacePresentation, mat: np.ndarray, max_steps: int = 4000):
    """Left-multiply by side pairings, strictly decreasing d(o, M o).

    Terminates with M' o in the Dirichlet domain about o = i; returns M'.
    """
    gens, _ = _generator_arrays(p)
    m = np.array(mat, dtype=float)
    cur = float(np.sum(m * m))
    for _ in range(max_steps):
        cand = np.einsum("gij,jk->gik", gens, m)
        d2 = np.einsum("gij,gij->g", cand, cand)
        best = int(np.argmin(d2))
        if d2[best] < cur - 1e-12:
            m = cand[best]
            cur = float(d2[best])
        else:
            return m
    raise ContractError("distance reduction failed to terminate")


def contains(p: SurfacePresentation, mat: np.ndarray, tol: float = 1e-6) -> bool:
    """Test membership of an SL(2,R) matrix in the group (up to sign)."""
    m = reduce_to_domain(p, mat)
    return bool(min(np.max(np.abs(m - np.eye(2))), np.max(np.abs(m + np.eye(2)))) < tol)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicClass:
    """One record of the length spectrum: a conjugacy-class family.

    multiplicity counts the distinct conjugacy classes sharing
    (primitive_length, power, chi_value); gamma and gamma^{-1} generically
    contribute two.
    """

    primitive_length: float
    power: int
    chi_value: int
    multiplicity: int
    representative: Word | None = None

    @property
    def total_length(self) -> float:
        return self.primitive_length * self.power


@dataclass(frozen=True)
class LengthSpectrum:
    cutoff: float
    classes: tuple[GeodesicClass, ...]
    group_fingerprint: str
    method: str = "pruned"
    diagnostics: object | None = field(default=None, compare=False, repr=False)

    def primitive_records(self) -> tuple[GeodesicClass, ...]:
        return tuple(c for c in self.classes if c.power == 1)


@dataclass
class EnumerationDiagnostics:
    """Class-level data retained for validation (not serialized)."""

    rep_mats: np.ndarray        # (C,2,2) canonical representative per class
    rep_lengths: np.ndarray     # (C,)
    rep_chi: np.ndarray         # (C,)
    rep_power: np.ndarray       # (C,) power n of each enumerated class
    rep_primitive: np.ndarray   # (C,) primitive length of each class
    rep_words: list             # Word or None per class
    ball: GroupBall | None


def spectrum_fingerprint(p: SurfacePresentation, ms: MultiplierSystem) -> str:
    payload = {
        "genus": p.genus,
        "generators": [[round(v, 12) for v in (g.a, g.b, g.c, g.d)] for g in p.generators],
        "relator": list(p.relator.letters),
        "signs": list(ms.signs),
        "weight_parity": ms.weight_parity,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _min_label_classes(ball: GroupBall, sub_idx: np.ndarray) -> np.ndarray:
    """Connected components of the subset under generator conjugation."""
    mats = ball.mats[sub_idx]
    n = mats.shape[0]
    sub_keys = ball.keys[sub_idx]
    order = np.argsort(sub_keys, kind="stable")
    skeys = sub_keys[order]
    gens = ball.gens
    nbr = np.full((len(gens), n), -1, dtype=np.int32)
    for gi in range(len(gens)):
        g = gens[gi]
        ginv = gens[(gi + len(gens) // 2) % len(gens)]
        conj = _conjugate_by(g, mats, ginv)
        h = _hash_mats(conj)
        pos = np.clip(np.searchsorted(skeys, h), 0, n - 1)
        hit = skeys[pos] == h
        nbr[gi] = np.where(hit, order[pos].astype(np.int32), np.int32(-1))
    labels = np.arange(n, dtype=np.int64)
    for _ in range(10000):
        old = labels
        lab = labels.copy()
        for gi in range(len(gens)):
            idx = nbr[gi]
            ok = idx >= 0
            np.minimum.at(lab, idx[ok], labels[ok])
            lab[ok] = np.minimum(lab[ok], labels[idx[ok]])
        lab = lab[lab]
        lab = lab[lab]
        labels = lab
        if np.array_equal(labels, old):
            break
    else:
        raise ContractError("conjugacy label propagation did not converge")
    return labels


def _nth_root(mat: np.ndarray, length: float, n: int) -> np.ndarray:
    """Real matrix n-th root of a hyperbolic tr>0 element (same axis)."""
    half = length / 2.0
    u = (mat - np.cosh(half) * np.eye(2)) / np.sinh(half)
    rh = length / (2.0 * n)
    root = np.cosh(rh) * np.eye(2) + np.sinh(rh) * u
    if root[0, 0] + root[1, 1] < 0:
        root = -root
    return root


def _cluster_lengths(lengths: np.ndarray, tol: float = 1e-9):
    """Map nearly equal lengths to cluster ids and canonical values.

    True distinct lengths at these scales are separated by far more than
    the quantization noise, so gap clustering is unambiguous.
    """
    lengths = np.asarray(lengths, dtype=float)
    if not len(lengths):
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    order = np.argsort(lengths)
    srt = lengths[order]
    new = np.empty(len(srt), dtype=bool)
    new[0] = True
    new[1:] = np.diff(srt) > tol * np.maximum(1.0, srt[1:])
    gid_sorted = np.cumsum(new) - 1
    ids = np.empty(len(srt), dtype=np.int64)
    ids[order] = gid_sorted
    canon = srt[new]
    return ids, canon


def enumerate_geodesics(p: SurfacePresentation, ms: MultiplierSystem, L: float,
                        method: str = "pruned", budget: int = 10_000_000,
                        store_words: bool | None = None,
                        max_word_len: int | None = None,
                        keep_ball: bool = False) -> LengthSpectrum:
    """Length spectrum of all conjugacy classes with total length <= L.

    Records are merged by (primitive length, power, chi); multiplicity
    counts distinct classes.  Power records are generated analytically
    from the primitive classes.
    """
    if L <= 0:
        raise ContractError("cutoff L must be positive")
    if method == "pruned":
        if p.circumradius is None:
            raise PresentationError("pruned enumeration needs a Dirichlet circumradius")
        dmax = 2.0 * np.arccosh(np.cosh(L / 2.0) * np.cosh(p.circumradius))
        ball = group_ball(p, dmax, budget=budget, store_words=store_words, length_cap=L)
    elif method == "brute":
        if max_word_len is None:
            max_word_len = int(np.ceil((L + 4.0) / p.min_generator_length * 1.6)) + 2
        ball = group_ball(p, np.inf, budget=budget, store_words=True,
                          max_word_len=max_word_len)
    else:
        raise ContractError(f"unknown enumeration method {method!r}")

    tr = ball.mats[:, 0, 0] + ball.mats[:, 1, 1]
    lengths_all = np.full(len(tr), np.inf)
    hyp = tr > 2.0 + 1e-10
    lengths_all[hyp] = 2.0 * np.arccosh(tr[hyp] / 2.0)
    keep = hyp & (lengths_all <= L + 1e-12)
    if method == "brute":
        # restrict to the canonical window: every class of length l has a
        # representative with cosh(d/2) <= cosh(l/2) cosh(R), and within
        # that window the conjugation orbit is connected
        circ = p.circumradius if p.circumradius is not None else \
            max(translation_length(g) for g in p.generators)
        dcap = 2.0 * np.arccosh(np.cosh(lengths_all[keep] / 2.0) * np.cosh(circ)) + 0.25
        window = _displacement2(ball.mats[keep]) <= 2.0 * np.cosh(dcap)
        sub = np.nonzero(keep)[0][window]
    else:
        sub = np.nonzero(keep)[0]

    if method == "pruned":
        labels = _min_label_classes(ball, sub)
    else:
        labels = _closure_labels(p, ball, sub, L)

    spec = _classes_to_spectrum(p, ms, ball, sub, labels, L,
                                method=method, keep_ball=keep_ball)
    return spec


def _closure_labels(p: SurfacePresentation, ball: GroupBall, sub: np.ndarray,
                    L: float) -> np.ndarray:
    """Conjugation-closure labels for the brute word ball (python-scale).

    Conjugation orbits are explored through elements of displacement at
    most the class's own displacement bound, where they are connected, so
    labels are exact Gamma-conjugacy classes.
    """
    gens = ball.gens
    mats = ball.mats[sub]
    n = len(sub)
    key_to_local = {}
    store = [mats[i] for i in range(n)]
    for i in range(n):
        key_to_local[int(_hash_mats(mats[i][None])[0])] = i
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    circ = p.circumradius if p.circumradius is not None else 3.0
    queue = list(range(n))
    qi = 0
    while qi < len(queue):
        i = queue[qi]
        qi += 1
        m = store[i]
        t = m[0, 0] + m[1, 1]
        length = 2.0 * np.arccosh(max(t / 2.0, 1.0))
        cap = 2.0 * np.cosh(2.0 * np.arccosh(np.cosh(length / 2.0) * np.cosh(circ)) + 0.5)
        for gi in range(len(gens)):
            conj = gens[gi] @ m @ gens[(gi + len(gens) // 2) % len(gens)]
            if np.sum(conj * conj) > cap:
                continue
            k = int(_hash_mats(conj[None])[0])
            j = key_to_local.get(k)
            if j is None:
                j = len(store)
                store.append(conj)
                key_to_local[k] = j
                parent.append(j)
                queue.append(j)
            union(i, j)
        if len(store) > 40 * max(n, 1) + 10000:
            raise BudgetError("conjugation closure grew unexpectedly large")
    return np.array([find(i) for i in range(n)], dtype=np.int64)


def _classes_to_spectrum(p, ms, ball, sub, labels, L, method, keep_ball):
    lengths = 2.0 * np.arccosh((ball.mats[sub, 0, 0] + ball.mats[sub, 1, 1]) / 2.0)
    chi = chi_of_ball(ball, ms)[sub]
    disp = _displacement2(ball.mats[sub])

    # group members by label; representative = min (displacement, key)
    order = np.lexsort((ball.keys[sub], np.rint(disp / 1e-6), labels))
    lab_sorted = labels[order]
    uniq_labels, first = np.unique(lab_sorted, return_index=True)
    rep_local = order[first]
    rep_sub_idx = sub[rep_local]
    rep_mats = ball.mats[rep_sub_idx]
    rep_len = lengths[rep_local]
    rep_chi = chi[rep_local]

    # chi is a character, hence constant on classes: check groupwise
    chi_sorted = chi[np.argsort(labels, kind="stable")]
    lab_runs = labels[np.argsort(labels, kind="stable")]
    same_run = lab_runs[1:] == lab_runs[:-1]
    if np.any(same_run & (chi_sorted[1:] != chi_sorted[:-1])):
        raise ContractError("chi not constant on a conjugacy class")

    cluster_ids, cluster_vals = _cluster_lengths(rep_len)
    del cluster_ids

    # primitive decomposition: batch n-th roots, largest n first
    lmin = float(np.min(rep_len)) if len(rep_len) else 1.0
    powers = np.ones(len(rep_len), dtype=np.int64)
    prim_len = rep_len.copy()
    nmax_global = int(np.floor(np.max(rep_len) / max(lmin, 1e-9) + 1e-9)) if len(rep_len) else 1
    for n in range(nmax_global, 1, -1):
        cand = rep_len / n
        unresolved = powers == 1
        feasible = unresolved & (cand >= lmin - 1e-9)
        if len(cluster_vals):
            pos = np.clip(np.searchsorted(cluster_vals, cand), 0, len(cluster_vals) - 1)
            near = np.minimum(np.abs(cluster_vals[pos] - cand),
                              np.abs(cluster_vals[np.maximum(pos - 1, 0)] - cand))
            feasible &= near <= 1e-8
        idxs = np.nonzero(feasible)[0]
        if not len(idxs):
            continue
        half = rep_len[idxs] / 2.0
        u = (rep_mats[idxs] - np.cosh(half)[:, None, None] * np.eye(2)) \
            / np.sinh(half)[:, None, None]
        rh = rep_len[idxs] / (2.0 * n)
        roots_m = np.cosh(rh)[:, None, None] * np.eye(2) + np.sinh(rh)[:, None, None] * u
        hit = ball.lookup(roots_m) >= 0
        powers[idxs[hit]] = n
        prim_len[idxs[hit]] = rep_len[idxs[hit]] / n

    rep_words = []
    for r in range(len(rep_len)):
        w = ball.word_of(int(rep_sub_idx[r])) if ball.parents is not None else None
        rep_words.append(w)

    diag = EnumerationDiagnostics(
        rep_mats=rep_mats, rep_lengths=rep_len, rep_chi=rep_chi,
        rep_power=powers, rep_primitive=prim_len, rep_words=rep_words,
        ball=ball if keep_ball else None)

    # merge primitive classes into records and regenerate powers analytically
    prim_mask = powers == 1
    prim_lengths = rep_len[prim_mask]
    prim_chis = rep_chi[prim_mask]
    prim_word_pool = [w for w, m in zip(rep_words, prim_mask) if m]
    records: dict[tuple, list] = {}
    if len(prim_lengths):
        pids, pvals = _cluster_lengths(prim_lengths)
        for i in range(len(prim_lengths)):
            key = (int(pids[i]), int(prim_chis[i]))
            rec = records.setdefault(key, [0, float(pvals[pids[i]]), prim_word_pool[i]])
            rec[0] += 1

    merged: dict[tuple, list] = {}
    for (cid, chival), (mult, lval, word) in records.items():
        n = 1
        while n * lval <= L + 1e-12:
            key = (cid, n, int(chival) ** n)
            slot = merged.setdefault(key, [0, float(lval), word])
            slot[0] += int(mult)
            n += 1
    out = [
        GeodesicClass(primitive_length=lval, power=n, chi_value=chiv,
                      multiplicity=mult, representative=word)
        for (cid, n, chiv), (mult, lval, word) in merged.items()
    ]
    out.sort(key=lambda c: (c.total_length, -c.chi_value, c.power))

    return LengthSpectrum(
        cutoff=float(L), classes=tuple(out),
        group_fingerprint=spectrum_fingerprint(p, ms),
        method=method, diagnostics=diag)


def primitive_decompose(c_mat: np.ndarray, p: SurfacePresentation,
                        length: float | None = None):
    """(primitive matrix, n) for a hyperbolic element, via root membership."""
    m = np.asarray(c_mat, dtype=float)
    if m[0, 0] + m[1, 1] < 0:
        m = -m
    if length is None:
        length = 2.0 * float(np.arccosh((m[0, 0] + m[1, 1]) / 2.0))
    lmin = p.min_generator_length
    for n in range(int(np.floor(length / lmin + 1e-9)), 1, -1):
        root = _nth_root(m, length, n)
        if contains(p, root):
            return root, n
    return m, 1


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------

def save_spectrum(spec: LengthSpectrum, path) -> None:
    buf = io.StringIO()
    buf.write(f"# diractrace spectrum cache v{_CACHE_VERSION}\n")
    buf.write(f"# fingerprint={spec.group_fingerprint} L={spec.cutoff:.17g} "
              f"method={spec.method} count={len(spec.classes)}\n")
    buf.write("primitive_length,n,chi,multiplicity,word\n")
    for c in spec.classes:
        w = str(c.representative) if c.representative is not None else ""
        buf.write(f"{c.primitive_length:.17g},{c.power},{c.chi_value},"
                  f"{c.multiplicity},{w}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_spectrum(path, p: SurfacePresentation, ms: MultiplierSystem) -> LengthSpectrum:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# diractrace spectrum cache v"):
        raise CacheError(f"not a spectrum cache: {path}")
    version = int(lines[0].rsplit("v", 1)[1])
    if version != _CACHE_VERSION:
        raise CacheError(f"unsupported cache version {version}")
    meta = dict(tok.split("=", 1) for tok in lines[1].lstrip("# ").split())
    expected = spectrum_fingerprint(p, ms)
    if meta["fingerprint"] != expected:
        raise CacheError(
            f"fingerprint mismatch: cache {meta['fingerprint']} vs group {expected}")
    classes = []
    for line in lines[3:]:
        if not line.strip():
            continue
        length, n, chi, mult, word = line.split(",", 4)
        classes.append(GeodesicClass(
            primitive_length=float(length), power=int(n), chi_value=int(chi),
            multiplicity=int(mult),
            representative=Word.parse(word) if word.strip() else None))
    return LengthSpectrum(cutoff=float(meta["L"]), classes=tuple(classes),
                          group_fingerprint=meta["fingerprint"],
                          method=meta["method"])


# ---------------------------------------------------------------------------
# presentation config files
# ---------------------------------------------------------------------------

def presentation_config(p: SurfacePresentation) -> str:
    """Serialize a presentation as the flat key-value config format."""
    out = [f"genus = {p.genus}"]
    for j, g in enumerate(p.generators):
        out.append(f"generator.{j} = {g.a:.17g} {g.b:.17g} {g.c:.17g} {g.d:.17g}")
    out.append(f"relator = {p.relator}")
    if p.circumradius is not None:
        out.append(f"circumradius = {p.circumradius:.17g}")
    if p.name:
        out.append(f"name = {p.name}")
    return "\n".join(out) + "\n"


def load_presentation(text: str) -> SurfacePresentation:
    """Parse and validate a presentation from config text."""
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise PresentationError(f"malformed config line: {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        entries[key] = val
    try:
        genus = int(entries.pop("genus"))
    except KeyError:
        raise PresentationError("config missing 'genus'") from None
    gens = []
    for j in range(2 * genus):
        key = f"generator.{j}"
        if key not in entries:
            raise PresentationError(f"config missing '{key}'")
        vals = [float(t) for t in entries.pop(key).split()]
        if len(vals) != 4:
            raise PresentationError(f"'{key}' needs 4 entries, got {len(vals)}")
        try:
            gens.append(GroupElement(*vals))
        except ContractError as exc:
            raise PresentationError(f"generator {j}: {exc}") from None
    if "relator" not in entries:
        raise PresentationError("config missing 'relator'")
    relator = Word.parse(entries.pop("relator"))
    circ = float(entries.pop("circumradius")) if "circumradius" in entries else None
    name = entries.pop("name", "")
    area_claim = float(entries.pop("area")) if "area" in entries else None
    if entries:
        raise PresentationError(f"unknown config keys: {sorted(entries)}")
    pres = _validate_presentation(genus, gens, relator, circ, name)
    if area_claim is not None and abs(area_claim - pres.area) > 1e-8 * pres.area:
        raise PresentationError(
            f"area mismatch: config says {area_claim}, Gauss-Bonnet gives {pres.area}")
    return pres
