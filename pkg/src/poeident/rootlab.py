"""Certified real-root isolation, exact gcds, and atomic factor structure.

Roots of the two univariate families are isolated by inductive bisection: the
certified roots of member ``n-1`` supply sign-change brackets for member ``n``
(that is the interlacing pattern itself), so every certificate is
self-validating -- a failed bracket would falsify the interlacing property and
raises ``InterlacingViolation``.  A companion-matrix eigenvalue solve provides
an independent numerical cross-check on every certificate.

Exact polynomial gcds use a primitive pseudo-remainder sequence over the
integers (rational backend only; gcd is discontinuous in the coefficients, so
no float variant is offered).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import BackendMismatch, InterlacingViolation, NonExactDivision
from .ioformats import format_number
from .polyseq import FLOAT, RATIONAL, UniPoly, p_uniform, s_poly

#: relative interval width at which bisection stops
REL_WIDTH = Fraction(1, 10**12)

P_FAMILY = "p_uniform"
S_FAMILY = "s_poly"


@dataclass(frozen=True)
class RootIsolation:
    """One isolated simple real root: lo == hi means the root is exact."""

    lo: Fraction
    hi: Fraction
    mid: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class BracketWitness:
    """Sign-change bracket that certified one root's existence."""

    lo: Fraction
    hi: Fraction
    sign_lo: int
    sign_hi: int


@dataclass(frozen=True)
class RootCertificate:
    family: str
    index: int
    gamma: object
    roots: tuple
    interlace_witness: tuple
    companion_max_dev: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "family": self.family,
                "index": self.index,
                "gamma": format_number(self.gamma),
                "roots": [
                    {"lo": format_number(r.lo), "hi": format_number(r.hi),
                     "mid": format_number(r.mid), "mid_float": float(r.mid)}
                    for r in self.roots
                ],
                "witnesses": [
                    {"lo": format_number(w.lo), "hi": format_number(w.hi),
                     "sign_lo": w.sign_lo, "sign_hi": w.sign_hi}
                    for w in self.interlace_witness
                ],
                "companion_max_dev": self.companion_max_dev,
            },
            sort_keys=True,
        )


def _width_goal(lo: Fraction, hi: Fraction) -> Fraction:
    scale = max(abs(lo), abs(hi), Fraction(1))
    return REL_WIDTH * scale


def _simple_between(lo: Fraction, hi: Fraction) -> Fraction:
    """A small-denominator rational inside the middle quarter of [lo, hi].

    Exact bisection with true midpoints compounds denominators up the
    inductive chain; snapping each probe to a dyadic grid keeps every integer
    in the sign evaluations bounded while still shrinking the bracket by at
    least a 5/8 factor per step.
    """
    width = hi - lo
    mid = (lo + hi) / 2
    need = 8 * width.denominator // max(width.numerator, 1)
    k = max(need.bit_length() + 1, 3)
    point = Fraction(round(mid * (1 << k)), 1 << k)
    if point <= lo or point >= hi:
        return mid
    return point


def _float_probe(poly: UniPoly, lo: Fraction, hi: Fraction, sign_lo: int, sign_hi: int,
                 goal):
    """Locate the root in float arithmetic, then certify the bracket exactly.

    Returns a certified isolation, or None when float resolution was not
    enough (the caller then falls back to fully exact bisection).
    """
    coeffs = [float(c) for c in poly.coeffs]

    def fsign(t):
        acc = 0.0
        for c in reversed(coeffs):
            acc = acc * t + c
        return (acc > 0.0) - (acc < 0.0)

    flo, fhi = float(lo), float(hi)
    target = float(goal(lo, hi)) / 8.0
    for _ in range(90):
        if fhi - flo <= max(target, 4e-16 * max(1.0, abs(flo), abs(fhi))):
            break
        fm = 0.5 * (flo + fhi)
        s = fsign(fm)
        if s == 0:
            break
        if s == sign_lo:
            flo = fm
        else:
            fhi = fm
    pad = (fhi - flo) + 1e-14 * max(1.0, abs(flo), abs(fhi))
    res = Fraction(goal(lo, hi))
    need = 16 * res.denominator // max(res.numerator, 1)
    k = max(60, need.bit_length() + 4)
    a = max(lo, Fraction(math.floor((flo - pad) * (1 << k)), 1 << k))
    b = min(hi, Fraction(math.ceil((fhi + pad) * (1 << k)), 1 << k))
    if not lo <= a < b <= hi or b - a > goal(a, b):
        return None
    if poly.sign_at(a) != sign_lo or poly.sign_at(b) != sign_hi:
        return None
    return RootIsolation(a, b, (a + b) / 2)


def bisect_root(poly: UniPoly, lo: Fraction, hi: Fraction, sign_lo: int, sign_hi: int,
                goal=None) -> RootIsolation:
    """Shrink a certified sign-change bracket around its unique root."""
    if goal is None:
        goal = _width_goal
    fast = _float_probe(poly, lo, hi, sign_lo, sign_hi, goal)
    if fast is not None:
        return fast
    while hi - lo > goal(lo, hi):
        mid = _simple_between(lo, hi)
        sm = poly.sign_at(mid)
        if sm == 0:
            return RootIsolation(mid, mid, mid)
        if sm == sign_lo:
            lo = mid
        else:
            hi = mid
    return RootIsolation(lo, hi, (lo + hi) / 2)


def refine_isolation(poly: UniPoly, iso: RootIsolation, target: Fraction) -> RootIsolation:
    """Narrow an existing isolation to at most ``target`` width."""
    if iso.width <= target:
        return iso
    s_lo = poly.sign_at(iso.lo)
    s_hi = poly.sign_at(iso.hi)
    return bisect_root(poly, iso.lo, iso.hi, s_lo, s_hi, goal=lambda a, b: target)


def _family_poly(family: str, index: int, gamma) -> UniPoly:
    if family == P_FAMILY:
        return p_uniform(index, gamma)
    if family == S_FAMILY:
        return s_poly(index, gamma)
    raise ValueError(f"unknown family {family!r}")


def _expected_count(family: str, index: int) -> int:
    return index // 2 if family == P_FAMILY else (index - 1) // 2


def _bracket_points(family: str, index: int, gamma, prev_roots):
    """Endpoint list whose consecutive pairs bracket every root of the member.

    For the a-variable family the roots live in (0, B); the first bracket is
    anchored at 0 and the top one at the Cauchy bound when the degree grows.
    For the line-restricted family the roots live in (-B, 0); the bottom
    bracket is anchored at -B when the degree grows, the top one at 0.
    """
    poly = _family_poly(family, index, gamma)
    count = _expected_count(family, index)
    inner = [(r.lo, r.hi) for r in prev_roots]
    if family == P_FAMILY:
        pts = [(Fraction(0), Fraction(0))] + inner
        if count == len(prev_roots) + 1:
            bound = Fraction(poly.cauchy_bound())
            pts.append((bound, bound))
    else:
        pts = inner + [(Fraction(0), Fraction(0))]
        if count == len(prev_roots) + 1:
            bound = Fraction(poly.cauchy_bound())
            pts.insert(0, (-bound, -bound))
    if len(pts) != count + 1:
        raise InterlacingViolation(
            f"{family}[{index}]: expected {count} roots, bracket scheme gave {len(pts) - 1}"
        )
    return pts


def _certificate(family: str, index: int, gamma) -> RootCertificate:
    poly = _family_poly(family, index, gamma)
    count = _expected_count(family, index)
    if count <= 0:
        return RootCertificate(family, index, gamma, (), (), 0.0)
    if count == 1 and poly.degree == 1:
        root = -Fraction(poly.coeffs[0]) / Fraction(poly.coeffs[1])
        iso = RootIsolation(root, root, root)
        wit = BracketWitness(root, root, 0, 0)
        dev = _companion_deviation(poly, (iso,))
        return RootCertificate(family, index, gamma, (iso,), (wit,), dev)

    prev = _certificate(family, index - 1, gamma)
    prev_poly = _family_poly(family, index - 1, gamma)
    prev_roots = list(prev.roots)

    roots = []
    witnesses = []
    for i in range(count):
        for attempt in range(80):
            pts = _bracket_points(family, index, gamma, prev_roots)
            # endpoint nearest the root region: right end of the left interval,
            # left end of the right interval
            a = pts[i][1]
            b = pts[i + 1][0]
            sa = poly.sign_at(a)
            sb = poly.sign_at(b)
            if sa == 0 or sb == 0:
                # landed exactly on the root; treat as an exact hit
                exact = a if sa == 0 else b
                roots.append(RootIsolation(exact, exact, exact))
                witnesses.append(BracketWitness(a, b, sa, sb))
                break
            if sa != sb:
                roots.append(bisect_root(poly, a, b, sa, sb))
                witnesses.append(BracketWitness(a, b, sa, sb))
                break
            # bracket not yet separating: sharpen the neighbouring isolations
            # of the previous member and retry
            changed = False
            for k in (i - 1, i):
                if 0 <= k < len(prev_roots) and prev_roots[k].width > 0:
                    prev_roots[k] = refine_isolation(
                        prev_poly, prev_roots[k], prev_roots[k].width / 16
                    )
                    changed = True
            if not changed:
                raise InterlacingViolation(
                    f"{family}[{index}] root {i + 1}: bracket "
                    f"({float(a):.6g}, {float(b):.6g}) has equal signs {sa}"
                )
        else:
            raise InterlacingViolation(
                f"{family}[{index}] root {i + 1}: bracket refinement did not separate"
            )
    # keep isolations strictly inside the family's root domain
    for i, iso in enumerate(roots):
        while iso.width > 0 and (
            (family == S_FAMILY and iso.hi >= 0) or (family == P_FAMILY and iso.lo <= 0)
        ):
            iso = refine_isolation(poly, iso, iso.width / 16)
        roots[i] = iso
    dev = _companion_deviation(poly, tuple(roots))
    return RootCertificate(family, index, gamma, tuple(roots), tuple(witnesses), dev)


def _companion_deviation(poly: UniPoly, roots) -> float:
    """Max relative gap between certified midpoints and companion eigenvalues."""
    coeffs = [float(c) for c in poly.coeffs]
    eig = np.roots(coeffs[::-1])
    real = sorted(z.real for z in eig if abs(z.imag) <= 1e-7 * max(1.0, abs(z)))
    mids = sorted(float(r.mid) for r in roots)
    if len(real) != len(mids):
        return float("inf")
    return max(
        (abs(a - b) / max(1.0, abs(b)) for a, b in zip(real, mids)), default=0.0
    )


@lru_cache(maxsize=None)
def _certificate_cached(family: str, index: int, gamma) -> RootCertificate:
    return _certificate(family, index, gamma)


def roots_interlaced(family: str, index: int, gamma) -> RootCertificate:
    """Certified simple real roots of a family member, with interlacing witnesses.

    The member must actually have roots: index >= 2 for the a-variable family,
    index >= 3 for the line-restricted family.
    """
    if family not in (P_FAMILY, S_FAMILY):
        raise ValueError(f"unknown family {family!r}")
    low = 2 if family == P_FAMILY else 3
    if index < low:
        raise ValueError(f"{family} members below index {low} have no roots")
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("certified isolation requires a rational gamma")
    cert = _certificate_cached(family, index, gamma)
    if family == S_FAMILY and any(iso.hi >= 0 for iso in cert.roots):
        raise InterlacingViolation(f"s[{index}] root not strictly negative")
    return cert


# ---------------------------------------------------------------------------
# exact gcd


def _integer_primitive(coeffs) -> list:
    den = 1
    for c in coeffs:
        c = Fraction(c)
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [int(Fraction(c) * den) for c in coeffs]
    g = 0
    for c in ints:
        g = math.gcd(g, abs(c))
    if g > 1:
        ints = [c // g for c in ints]
    return ints


def _pseudo_rem(a: list, b: list) -> list:
    """Pseudo-remainder of integer coefficient lists (ascending)."""
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and any(a):
        while a and a[-1] == 0:
            a.pop()
        if len(a) - 1 < db:
            break
        la = a[-1]
        shift = len(a) - 1 - db
        a = [c * lb for c in a]
        for j in range(db + 1):
            a[shift + j] -= la * b[j]
        a.pop()
    while a and a[-1] == 0:
        a.pop()
    return a


def gcd_poly(f: UniPoly, g: UniPoly) -> UniPoly:
    """Monic exact gcd via a primitive pseudo-remainder sequence."""
    if f.backend != RATIONAL or g.backend != RATIONAL:
        raise BackendMismatch("gcd requires the rational backend")
    if f.is_zero() and g.is_zero():
        raise ValueError("gcd(0, 0) is undefined")
    if f.is_zero():
        return g.monic()
    if g.is_zero():
        return f.monic()
    a = _integer_primitive(f.coeffs)
    b = _integer_primitive(g.coeffs)
    if len(a) < len(b):
        a, b = b, a
    while b:
        r = _pseudo_rem(a, b)
        if r:
            gc = 0
            for c in r:
                gc = math.gcd(gc, abs(c))
            if gc > 1:
                r = [c // gc for c in r]
        a, b = b, r
    return UniPoly(a, RATIONAL, f.gamma).monic()


# ---------------------------------------------------------------------------
# Sturm chains (used for exact root counting inside certified intervals)


def sturm_chain(f: UniPoly) -> list:
    """Sturm sequence of a square-free rational polynomial."""
    if f.backend != RATIONAL:
        raise BackendMismatch("Sturm chains require the rational backend")
    chain = [f, f.derivative()]
    while not chain[-1].is_zero() and chain[-1].degree > 0:
        _, rem = chain[-2].divmod(chain[-1])
        if rem.is_zero():
            break
        lead = abs(Fraction(rem.leading()))
        chain.append(UniPoly([-c / lead for c in rem.coeffs], RATIONAL, f.gamma))
    return chain


def _variations(chain, point: Fraction) -> int:
    signs = [p.sign_at(point) for p in chain]
    signs = [s for s in signs if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)


def count_roots_between(f: UniPoly, lo: Fraction, hi: Fraction) -> int:
    """Distinct real roots of square-free ``f`` in (lo, hi]; endpoints must not be roots of f."""
    chain = sturm_chain(f)
    return _variations(chain, lo) - _variations(chain, hi)


def has_root_in(f: UniPoly, iso: RootIsolation) -> bool:
    """Whether ``f`` vanishes at the algebraic number isolated by ``iso``.

    Exact: reduces to a gcd against the isolation's own certificate interval,
    so a nearby-but-distinct root of ``f`` cannot produce a false positive --
    callers pass ``f`` already gcd-reduced against the defining polynomial.
    """
    if iso.lo == iso.hi:
        return f(iso.lo) == 0
    if f.is_zero():
        return True
    if f.degree == 0:
        return False
    return count_roots_between(f, iso.lo, iso.hi) > 0


def vanishes_at_isolated_root(f: UniPoly, defining: UniPoly, iso: RootIsolation) -> bool:
    """Exact test: does ``f`` vanish at the root of ``defining`` isolated by ``iso``?"""
    if iso.lo == iso.hi:
        return f(iso.lo) == 0
    common = gcd_poly(f, defining)
    if common.degree <= 0:
        return False
    return count_roots_between(common, iso.lo, iso.hi) > 0


# ---------------------------------------------------------------------------
# atomic factors


@dataclass(frozen=True)
class AtomicFactor:
    """New root content of s_n after dividing out every proper divisor's factor."""

    n: int
    h: UniPoly
    degree: int


def divisors(n: int) -> list:
    out = [d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0]
    out += [n // d for d in reversed(out) if d * d != n]
    return out


def mobius(n: int) -> int:
    if n == 1:
        return 1
    result = 1
    d = 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            result = -result
        d += 1
    if n > 1:
        result = -result
    return result


@lru_cache(maxsize=None)
def atomic(n: int, gamma=1) -> AtomicFactor:
    """Atomic factor of s_n: h_n = s_n / prod of h_d over proper divisors d of n.

    Exact division on the rational backend; a nonzero remainder would falsify
    the factorization and raises NonExactDivision.
    """
    if n < 1:
        raise ValueError("index must be at least 1")
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("atomic factors require a rational gamma")
    h = s_poly(n, gamma)
    for d in divisors(n):
        if d == n:
            continue
        quotient, rem = h.divmod(atomic(d, gamma).h)
        if not rem.is_zero():
            raise NonExactDivision(f"h_{d} does not divide s_{n} exactly")
        h = quotient
    return AtomicFactor(n, h, h.degree)


def atomic_degree(n: int) -> int:
    """Closed-form degree of the atomic factor h_n.

    Zero for n in {1, 2}; for n > 2 it is (n/2) * prod over prime q | n of
    (1 - 1/q), which always comes out an integer.
    """
    if n < 1:
        raise ValueError("index must be at least 1")
    if n <= 2:
        return 0
    value = Fraction(n, 2)
    m = n
    q = 2
    while q * q <= m:
        if m % q == 0:
            value *= Fraction(q - 1, q)
            while m % q == 0:
                m //= q
        q += 1
    if m > 1:
        value *= Fraction(m - 1, m)
    if value.denominator != 1:
        raise AssertionError(f"degree formula not integral at n={n}")
    return int(value)


def atomic_degree_mobius(n: int) -> int:
    """Independent degree computation by Mobius inversion over the divisor lattice."""
    return sum(mobius(n // d) * ((d - 1) // 2) for d in divisors(n))


def atomic_roots(n: int, gamma=1) -> list:
    """Isolations (from s_n's certificate) of exactly the roots of h_n."""
    h = atomic(n, gamma).h
    if h.degree <= 0:
        return []
    cert = roots_interlaced(S_FAMILY, n, gamma)
    out = [iso for iso in cert.roots if has_root_in(h, iso)]
    if len(out) != h.degree:
        raise InterlacingViolation(
            f"h_{n}: found {len(out)} isolations for degree {h.degree}"
        )
    return out


# ---------------------------------------------------------------------------
# figure data: roots of s_15 tagged by their atomic factor


def fig2_data(gamma=1) -> list:
    """Rows (root, log(-root), tag) for every root of s_15, ascending.

    Each root is tagged by the unique atomic factor among h_3, h_5, h_15
    whose root it is; membership is decided exactly via Sturm counts on the
    certified isolating intervals.
    """
    cert = roots_interlaced(S_FAMILY, 15, gamma)
    factors = {d: atomic(d, gamma).h for d in (3, 5, 15)}
    rows = []
    for iso in cert.roots:
        tags = [d for d, h in factors.items() if h.degree > 0 and has_root_in(h, iso)]
        if len(tags) != 1:
            raise NonExactDivision(f"root near {float(iso.mid):.6g} matched tags {tags}")
        root = float(iso.mid)
        rows.append((root, math.log(-root), f"h_{tags[0]}"))
    return rows


def fig2_csv(gamma=1) -> str:
    lines = ["root,log_neg_root,atomic_tag"]
    for root, log_neg, tag in fig2_data(gamma):
        lines.append(f"{root!r},{log_neg!r},{tag}")
    return "\n".join(lines) + "\n"
