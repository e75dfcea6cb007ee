"""Local-identifiability certificates for symmetric product maps.

Three certification routes are provided:

* ``certify_uniform``  -- the diagonal-Jacobian construction for the
  uniform-prior moment map: gather one simple root per family member, build
  the integer multiplicity matrix, eliminate it to a product recipe of
  rational functions whose transformed Jacobian is diagonal, and cross-check
  against a finite-difference Jacobian of the raw moment map.
* ``select_perturbed_points`` + ``jacobian_general`` -- the general-prior
  route: evaluation points are chosen near atomic roots shared along the line
  x = g/2, with a cascade of shrinking tolerances; the scaled block matrix B
  is certified nonsingular in exact arithmetic.
* ``multiplicity_matrix`` + ``rank_over_Q`` -- the bare rank criterion for
  arbitrary rational-function families (expert use).

Every verdict pairs the transformed object with an independent
finite-difference check of the raw map; margins and scalings are recorded in
the certificate diagnostics.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__ as _pkg_version
from .errors import (
    BackendMismatch,
    ConstantPolynomialInFamily,
    EpsilonCascadeFailure,
    SingularAtChosenPoint,
    SingularLeadingBlock,
    UncertifiableMultiplicity,
)
from .ioformats import format_number
from .polyseq import BiPoly, RATIONAL, UniPoly, p_biv, p_uniform, r_biv, s_poly
from .rootlab import (
    P_FAMILY,
    RootIsolation,
    atomic_roots,
    count_roots_between,
    gcd_poly,
    refine_isolation,
    roots_interlaced,
)


def _check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise TimeoutError("cooperative deadline exceeded")


# ---------------------------------------------------------------------------
# rational functions and evaluation points


@dataclass(frozen=True)
class RationalFunc:
    """Quotient of rational-backend polynomials, auto-reduced to lowest terms."""

    num: UniPoly
    den: UniPoly = UniPoly((1,), RATIONAL)

    def __post_init__(self):
        if self.num.backend != RATIONAL or self.den.backend != RATIONAL:
            raise BackendMismatch("rational functions require the rational backend")
        if self.den.is_zero():
            raise ZeroDivisionError("zero denominator")
        num, den = self.num, self.den
        if not num.is_zero() and den.degree > 0 and num.degree > 0:
            g = gcd_poly(num, den)
            if g.degree > 0:
                num = num.divmod(g)[0]
                den = den.divmod(g)[0]
        if den.degree == 0:
            num = num * (Fraction(1) / Fraction(den.leading()))
            den = UniPoly((1,), RATIONAL)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, point):
        d = self.den(point)
        if d == 0:
            raise ZeroDivisionError("evaluation at a pole")
        n = self.num(point)
        if isinstance(n, (int, Fraction)) and isinstance(d, (int, Fraction)):
            return Fraction(n) / Fraction(d)
        return n / d

    def derivative(self) -> "RationalFunc":
        return RationalFunc(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    @staticmethod
    def from_poly(p: UniPoly) -> "RationalFunc":
        return RationalFunc(p)


def product_power(funcs, exponents) -> RationalFunc:
    """Product of rational functions raised to (possibly negative) integer powers."""
    num = UniPoly((1,), RATIONAL)
    den = UniPoly((1,), RATIONAL)
    for f, e in zip(funcs, exponents):
        if not isinstance(f, RationalFunc):
            f = RationalFunc.from_poly(f)
        if e > 0:
            for _ in range(e):
                num = num * f.num
                den = den * f.den
        elif e < 0:
            for _ in range(-e):
                num = num * f.den
                den = den * f.num
    return RationalFunc(num, den)


@dataclass(frozen=True)
class AlgebraicPoint:
    """A real algebraic number: the unique root of ``defining`` inside ``iso``."""

    defining: UniPoly
    iso: RootIsolation

    @property
    def approx(self) -> Fraction:
        return self.iso.mid


def _as_point(point):
    if isinstance(point, AlgebraicPoint):
        return point
    if isinstance(point, (int, Fraction)):
        return Fraction(point)
    raise UncertifiableMultiplicity(
        f"points must be exact rationals or certified root intervals, got {type(point).__name__}"
    )


def point_approx(point) -> Fraction:
    point = _as_point(point)
    return point if isinstance(point, Fraction) else point.approx


def multiplicity_poly(f: UniPoly, point) -> int:
    """Exact root multiplicity of ``point`` in ``f`` (0 when not a root)."""
    if f.backend != RATIONAL:
        raise UncertifiableMultiplicity("float polynomials cannot be matched exactly")
    if f.is_zero():
        raise ValueError("the zero polynomial has no multiplicity structure")
    point = _as_point(point)
    if isinstance(point, Fraction):
        m, cur = 0, f
        divisor = UniPoly((-point, 1), RATIONAL)
        while not cur.is_zero() and cur(point) == 0:
            cur = cur.divmod(divisor)[0]
            m += 1
        return m
    g, iso = point.defining, point.iso
    if g.backend != RATIONAL:
        raise UncertifiableMultiplicity("defining polynomial must be exact")
    if iso.lo == iso.hi:
        return multiplicity_poly(f, iso.lo)
    m, cur = 0, f
    while not cur.is_zero() and cur.degree >= 0 and _vanishes(cur, g, iso):
        cur = cur.derivative()
        m += 1
    return m


def _vanishes(f: UniPoly, defining: UniPoly, iso: RootIsolation) -> bool:
    if f.degree <= 0:
        return f.is_zero()
    common = gcd_poly(f, defining)
    if common.degree <= 0:
        return False
    return count_roots_between(common, iso.lo, iso.hi) > 0


def multiplicity(func, point) -> int:
    """Multiplicity for UniPoly or RationalFunc; negative values are pole orders."""
    if isinstance(func, RationalFunc):
        return multiplicity_poly(func.num, point) - multiplicity_poly(func.den, point)
    return multiplicity_poly(func, point)


# ---------------------------------------------------------------------------
# multiplicity matrix, exact rank, elimination


@dataclass(frozen=True)
class MultiplicityMatrix:
    """Integer matrix of root multiplicities / pole orders at distinguished points."""

    entries: tuple
    funcs: tuple = ()
    points: tuple = ()

    @property
    def shape(self):
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)


def multiplicity_matrix(funcs, points) -> MultiplicityMatrix:
    """M[i][j] = multiplicity of point j in function i (poles negative).

    Every point must be a root or pole of at least one function.
    """
    funcs = tuple(
        f if isinstance(f, RationalFunc) else RationalFunc.from_poly(f) for f in funcs
    )
    points = tuple(_as_point(p) for p in points)
    entries = tuple(
        tuple(multiplicity(f, p) for p in points) for f in funcs
    )
    for j in range(len(points)):
        if all(row[j] == 0 for row in entries):
            raise ValueError(f"point {j} is not a root or pole of any function")
    return MultiplicityMatrix(entries, funcs, points)


def _rows_of(matrix):
    if isinstance(matrix, MultiplicityMatrix):
        return [list(r) for r in matrix.entries]
    return [list(r) for r in matrix]


def rank_over_Q(matrix) -> int:
    """Exact rank of an integer matrix by fraction-free (Bareiss) elimination."""
    rows = [[int(c) for c in r] for r in _rows_of(matrix)]
    if not rows:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    rank, prev, r = 0, 1, 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        for i in range(r + 1, n_rows):
            for j in range(c + 1, n_cols):
                rows[i][j] = (rows[i][j] * rows[r][c] - rows[i][c] * rows[r][j]) // prev
            rows[i][c] = 0
        prev = rows[r][c]
        r += 1
        rank += 1
        if r == n_rows:
            break
    return rank


def rational_kernel_vector(matrix):
    """An integer vector v with v . rows(M) = 0, or None when rows are independent."""
    rows = [[Fraction(c) for c in r] for r in _rows_of(matrix)]
    n = len(rows)
    if n == 0:
        return None
    # eliminate on the transposed system: find v with sum_i v_i * row_i = 0
    aug = [[rows[i][j] for i in range(n)] for j in range(len(rows[0]))]  # cols x n
    piv_cols = []
    r = 0
    for c in range(n):
        pivot = next((i for i in range(r, len(aug)) if aug[i][c] != 0), None)
        if pivot is None:
            # free variable: build kernel vector with v_c = 1
            v = [Fraction(0)] * n
            v[c] = Fraction(1)
            for k in range(r - 1, -1, -1):
                i, pc = piv_cols[k]
                v[pc] = -sum(aug[i][j] * v[j] for j in range(pc + 1, n)) / aug[i][pc]
            lcm = 1
            for x in v:
                lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
            ints = [int(x * lcm) for x in v]
            g = 0
            for x in ints:
                g = math.gcd(g, abs(x))
            return [x // max(g, 1) for x in ints]
        aug[r], aug[pivot] = aug[pivot], aug[r]
        aug[r] = [x / aug[r][c] for x in aug[r]]
        for i in range(len(aug)):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        piv_cols.append((r, c))
        r += 1
    return None


@dataclass(frozen=True)
class EliminationRecipe:
    """Integer row operations N with N * M = (D | B) on the chosen columns.

    ``transforms[i]`` is the rational function prod_k funcs_k^{N[i][k]}; its
    multiplicity at chosen point j is D[i] when j == i and 0 otherwise
    (recounted exactly).  Diagonal entries above 1 flag a higher-order local
    expansion (the certificate keeps them in ``expansion_orders``).
    """

    N: tuple
    D: tuple
    columns: tuple
    transforms: tuple
    expansion_orders: tuple


def eliminate(matrix: MultiplicityMatrix, auto_permute: bool = True) -> EliminationRecipe:
    """Diagonalize the leading block of a multiplicity matrix over the integers.

    With ``auto_permute`` the pivot columns are chosen greedily (earliest
    usable column); otherwise the leading square block must already be
    nonsingular, else SingularLeadingBlock.
    """
    rows = _rows_of(matrix)
    ell = len(rows)
    width = len(rows[0]) if rows else 0
    N = [[1 if i == j else 0 for j in range(ell)] for i in range(ell)]
    used = []
    for k in range(ell):
        candidates = range(width) if auto_permute else range(k, k + 1)
        col = None
        for c in candidates:
            if c in used:
                continue
            if any(rows[i][c] != 0 for i in range(k, ell)):
                col = c
                break
        if col is None:
            raise SingularLeadingBlock(
                "no usable pivot column; permute columns or drop dependent rows"
            )
        pivot = min(
            (i for i in range(k, ell) if rows[i][col] != 0),
            key=lambda i: abs(rows[i][col]),
        )
        rows[k], rows[pivot] = rows[pivot], rows[k]
        N[k], N[pivot] = N[pivot], N[k]
        for i in range(ell):
            if i == k or rows[i][col] == 0:
                continue
            a, b = rows[k][col], rows[i][col]
            rows[i] = [a * x - b * y for x, y in zip(rows[i], rows[k])]
            N[i] = [a * x - b * y for x, y in zip(N[i], N[k])]
            g = 0
            for x in N[i] + rows[i]:
                g = math.gcd(g, abs(x))
            if g > 1:
                rows[i] = [x // g for x in rows[i]]
                N[i] = [x // g for x in N[i]]
        used.append(col)
    for k in range(ell):
        if rows[k][used[k]] < 0:
            rows[k] = [-x for x in rows[k]]
            N[k] = [-x for x in N[k]]
    D = tuple(rows[k][used[k]] for k in range(ell))

    transforms = ()
    if matrix.funcs:
        transforms = tuple(product_power(matrix.funcs, N[i]) for i in range(ell))
        for i, rf in enumerate(transforms):
            for j, c in enumerate(used):
                got = multiplicity(rf, matrix.points[c])
                want = D[i] if j == i else 0
                if got != want:
                    raise UncertifiableMultiplicity(
                        f"recount failed at transform {i}, point {c}: {got} != {want}"
                    )
    return EliminationRecipe(
        tuple(tuple(r) for r in N), D, tuple(used), transforms, D
    )


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class IdentCertificate:
    case: str
    ell: int
    gamma: object
    moment_indices: tuple
    eval_point: tuple
    matrix: tuple
    det_or_rank: object
    verdict: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_json(self) -> str:
        return json.dumps(
            {
                "case": self.case,
                "ell": self.ell,
                "gamma": format_number(self.gamma),
                "moment_indices": list(self.moment_indices),
                "eval_point": [float(v) for v in self.eval_point],
                "matrix": [[float(v) for v in row] for row in self.matrix],
                "det_or_rank": self.det_or_rank if isinstance(self.det_or_rank, int)
                else float(self.det_or_rank),
                "verdict": self.verdict,
                "diagnostics": self.diagnostics,
                "provenance": {"package": "poeident", "version": _pkg_version,
                               "backend": "rational+float"},
            },
            sort_keys=True,
        )


def _fraction_det(rows) -> Fraction:
    rows = [[Fraction(c) for c in r] for r in rows]
    n = len(rows)
    det = Fraction(1)
    for c in range(n):
        pivot = next((i for i in range(c, n) if rows[i][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            rows[c], rows[pivot] = rows[pivot], rows[c]
            det = -det
        det *= rows[c][c]
        inv = Fraction(1) / rows[c][c]
        for i in range(c + 1, n):
            if rows[i][c] != 0:
                f = rows[i][c] * inv
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[c])]
    return det


def _fd_jacobian(func, x0, h_rel=1e-6):
    """Central-difference Jacobian of func: R^n -> R^m at x0 (float)."""
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(func(x0), dtype=float)
    J = np.zeros((f0.size, x0.size))
    for j in range(x0.size):
        h = h_rel * max(1.0, abs(x0[j]))
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(func(xp)) - np.asarray(func(xm))) / (2 * h)
    return J


def certify_uniform(ell: int, gamma, moment_indices=None, *, seed: int = 0,
                    deadline=None) -> IdentCertificate:
    """Certify local identifiability of the uniform-prior moment map.

    Builds the product-recipe rational functions whose transformed Jacobian at
    the chosen roots is exactly diagonal, evaluates it in exact arithmetic at
    the certified root midpoints, and cross-checks with a finite-difference
    Jacobian of the raw map at a seeded random point nearby (the raw Jacobian
    can be exactly singular at the root point itself when family members share
    roots, so the numerical check must not sit exactly there).
    """
    if moment_indices is None:
        moment_indices = tuple(range(2, ell + 2))
    moment_indices = tuple(int(m) for m in moment_indices)
    if len(moment_indices) != ell:
        raise ValueError(f"need exactly {ell} moment indices")
    if any(m <= 1 for m in moment_indices):
        raise ConstantPolynomialInFamily(
            "family members below index 2 are constants with no roots"
        )
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("certification requires a rational gamma")

    polys = [p_uniform(m, gamma) for m in moment_indices]
    points = []
    for m, poly in zip(moment_indices, polys):
        _check_deadline(deadline)
        cert = roots_interlaced(P_FAMILY, m, gamma)
        iso = cert.roots[0]
        if iso.width > 0:
            iso = refine_isolation(poly, iso, Fraction(1, 10**20) * max(1, abs(iso.mid)))
        points.append(AlgebraicPoint(poly, iso))

    M = multiplicity_matrix(polys, points)
    recipe = eliminate(M)

    # transformed Jacobian, exact at the interval midpoints
    mids = [point_approx(p) for p in points]
    T = [[Fraction(0)] * ell for _ in range(ell)]
    for i, rf in enumerate(recipe.transforms):
        _check_deadline(deadline)
        vals = [rf(t) for t in mids]
        deriv = rf
        for _ in range(recipe.D[i]):
            deriv = deriv.derivative()
        for j in range(ell):
            prod = Fraction(1)
            for j2 in range(ell):
                if j2 != j:
                    prod *= vals[j2]
            T[i][j] = prod * deriv(mids[j])

    # rows of T scale very differently (values shrink fast with the member
    # index), so diagonal dominance is judged per row
    row_ratios = []
    for i in range(ell):
        if T[i][i] == 0:
            row_ratios.append(Fraction(10**9))
            continue
        off = max((abs(T[i][j]) for j in range(ell) if j != i), default=Fraction(0))
        row_ratios.append(off / abs(T[i][i]))
    off_over_diag = max(row_ratios)
    diag_ok = all(T[i][i] != 0 for i in range(ell)) and off_over_diag < Fraction(1, 10**8)
    det_T = _fraction_det(T)

    # independent numerical check: raw moment map near (not at) the root point
    rng = np.random.default_rng(seed)
    base = np.array([float(t) for t in mids])
    probe = base * (1.0 + 1e-4 * rng.uniform(0.5, 1.0, ell) * rng.choice([-1, 1], ell))
    gf = float(gamma)

    def raw_map(a):
        out = []
        for m in moment_indices:
            vals = _p_uniform_values(m, gf, a)
            out.append(np.prod(vals))
        return np.array(out)

    J_fd = _fd_jacobian(raw_map, probe)
    # rows span many orders of magnitude; equilibrate before the rank test
    norms = np.linalg.norm(J_fd, axis=1, keepdims=True)
    if np.all(norms > 0):
        svals = np.linalg.svd(J_fd / norms, compute_uv=False)
        fd_ok = svals[-1] > 1e-8 * svals[0]
    else:
        svals = np.zeros(ell)
        fd_ok = False

    verdict = "certified" if (diag_ok and fd_ok) else "not_certified"
    diagnostics = {
        "diag_min": float(min(abs(T[i][i]) for i in range(ell))),
        "offdiag_over_diag": float(off_over_diag),
        "fd_smin_over_smax": float(svals[-1] / svals[0]) if svals[0] > 0 else 0.0,
        "fd_probe": [float(v) for v in probe],
        "elimination_D": list(recipe.D),
        "elimination_columns": list(recipe.columns),
        "root_interval_width_max": float(max(p.iso.width for p in points)),
        "seed": seed,
    }
    return IdentCertificate(
        case="uniform",
        ell=ell,
        gamma=gamma,
        moment_indices=moment_indices,
        eval_point=tuple(float(t) for t in mids),
        matrix=tuple(tuple(float(v) for v in row) for row in T),
        det_or_rank=float(det_T),
        verdict=verdict,
        diagnostics=diagnostics,
    )


def _p_uniform_values(m: int, gamma: float, a):
    """Float recurrence evaluation of the a-variable family at vector a."""
    a = np.asarray(a, dtype=float)
    p_prev = np.ones_like(a)
    p_cur = np.full_like(a, gamma / 2.0)
    if m == 0:
        return p_prev
    for _ in range(2, m + 1):
        p_prev, p_cur = p_cur, gamma * p_cur - a * p_prev
    return p_cur


# ---------------------------------------------------------------------------
# general-prior route: perturbed common roots


@dataclass(frozen=True)
class PerturbedPointSet:
    """Evaluation data for the general-prior Jacobian.

    ``c[n]`` approximates an atomic root of s_{2n+3-2}?  No: c[n-1] is the
    midpoint of a certified atomic-root isolation of s_{2n+1}; ``d[n-1]`` is
    the exact rational evaluation point chosen nearby so the shrinking
    tolerance cascade holds; ``R[n-1]`` is the divisibility set
    {j : (2j+1) | (2n+1)}.
    """

    c: tuple
    d: tuple
    delta: Fraction
    eps_cascade: tuple
    R: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def ell(self) -> int:
        return len(self.d)


def divisibility_sets(ell: int):
    """R_n = {j : (2j+1) | (2n+1)} and D_j = {n : j in R_n}, both within 1..ell."""
    R = [frozenset(j for j in range(1, ell + 1) if (2 * n + 1) % (2 * j + 1) == 0)
         for n in range(1, ell + 1)]
    D = [frozenset(n for n in range(1, ell + 1) if j in R[n - 1])
         for j in range(1, ell + 1)]
    return R, D


def select_perturbed_points(ell: int, gamma=1, *, eps_init=Fraction(1, 1000),
                            max_halvings: int = 20000, deadline=None) -> PerturbedPointSet:
    """Choose evaluation points near atomic roots along the line.

    For each n the point d_n sits next to an atomic root c_n of s_{2n+1},
    close enough that |s_{2k+1}(d_n)| and |s_{4k+2}(d_n)| fall below the
    current cascade tolerance for every k whose root family shares c_n; the
    next tolerance is the smallest magnitude just produced.  All evaluations
    are exact rational arithmetic, so the cascade comparisons are certificates
    rather than estimates.
    """
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("point selection requires a rational gamma")
    R, D = divisibility_sets(ell)
    s_cache = {m: s_poly(m, gamma) for m in range(0, 4 * ell + 3)}

    c_pts, d_pts, eps_seq = [], [], []
    eps = Fraction(eps_init)
    scale = Fraction(gamma) * Fraction(gamma)
    for i in range(1, ell + 1):
        _check_deadline(deadline)
        eps_seq.append(eps)
        defining = s_cache[2 * i + 1]
        iso = atomic_roots(2 * i + 1, gamma)[0]
        needed = []
        for k in D[i - 1]:
            needed.append(s_cache[2 * k + 1])
            needed.append(s_cache[4 * k + 2])

        # The midpoint only approximates the root, which floors how small the
        # nearby values can get; when the step approaches the isolation width
        # the isolation itself is sharpened and the search resumes.
        d = None
        total_halvings = 0
        for _ in range(60):
            _check_deadline(deadline)
            c = iso.mid
            t = max(abs(c), scale) / 64
            while t > 8 * iso.width or iso.width == 0:
                cand = c + t
                vals = [abs(p(cand)) for p in needed]
                if all(0 < v < eps for v in vals):
                    d = cand
                    break
                t = t / 2
                total_halvings += 1
                if total_halvings > max_halvings:
                    raise EpsilonCascadeFailure(
                        f"could not satisfy the tolerance cascade near point {i}"
                    )
            if d is not None:
                break
            iso = refine_isolation(defining, iso, iso.width / 2**16)
        if d is None:
            raise EpsilonCascadeFailure(
                f"root isolation refinement stalled near point {i}"
            )
        c_pts.append(iso.mid)
        d_pts.append(d)
        eps = min(abs(p(d)) for p in needed)

    # ratio certificates: |s_(2n+1)(d_n)| <= |s_(2n+1)(d_k)| for k in R_n, k != n
    for n in range(1, ell + 1):
        for k in R[n - 1]:
            if k == n:
                continue
            for m in (2 * n + 1, 4 * n + 2):
                if not abs(s_cache[m](d_pts[n - 1])) <= abs(s_cache[m](d_pts[k - 1])):
                    raise EpsilonCascadeFailure(
                        f"ratio bound violated for s_{m} at points {n}, {k}"
                    )

    delta = max(abs(d - c) for d, c in zip(d_pts, c_pts))
    margins = {}
    for n in range(1, ell + 1):
        lo = float(c_pts[n - 1] - delta)
        hi = float(c_pts[n - 1] + delta)
        grid = np.linspace(lo, hi, 64)
        gf = float(gamma)
        s2n = _s_values(2 * n, gf, grid)
        s2n2 = _s_values(2 * n + 2, gf, grid)
        ds = _s_derivative_values(2 * n + 1, gf, grid)
        margins[f"interval_{n}"] = {
            "min_abs_s_2n": float(np.min(np.abs(s2n))),
            "min_abs_s_2n_plus_2": float(np.min(np.abs(s2n2))),
            "min_abs_ds_2n_plus_1": float(np.min(np.abs(ds))),
        }
    return PerturbedPointSet(
        c=tuple(c_pts),
        d=tuple(d_pts),
        delta=delta,
        eps_cascade=tuple(eps_seq),
        R=tuple(R),
        diagnostics={"A_margins": margins, "eps_init": float(eps_init)},
    )


def _s_values(n: int, gamma: float, y):
    y = np.asarray(y, dtype=float)
    prev = np.zeros_like(y)
    cur = np.ones_like(y)
    if n == 0:
        return prev
    for _ in range(2, n + 1):
        prev, cur = cur, gamma * cur - (gamma * gamma / 4.0 - y) * prev
    return cur


def _s_derivative_values(n: int, gamma: float, y):
    y = np.asarray(y, dtype=float)
    prev, cur = np.zeros_like(y), np.ones_like(y)
    dprev, dcur = np.zeros_like(y), np.zeros_like(y)
    for _ in range(2, n + 1):
        nxt = gamma * cur - (gamma * gamma / 4.0 - y) * prev
        dnxt = gamma * dcur + prev - (gamma * gamma / 4.0 - y) * dprev
        prev, cur, dprev, dcur = cur, nxt, dcur, dnxt
    return dcur if n >= 2 else dprev


def _biv_partials(poly: BiPoly):
    return poly.partial_x(), poly.partial_y()


def detj_line_identity(i: int, gamma, y0) -> tuple:
    """Both sides of the line determinant identity for the block pair (r_i, r_{2i+1}).

    Returns (direct, closed_form) where ``direct`` is the 2x2 Jacobian
    determinant of (x, y) -> (r_i, r_{2i+1}) at (g/2, y0) and ``closed_form``
    is -2 s_{i+2} s_i s'_{i+1} + s_{i+1} (F_i + G_i); exact on rational input.
    """
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("the line identity check runs on the rational backend")
    half = Fraction(gamma, 2)
    ri, r2i1 = r_biv(i, gamma), r_biv(2 * i + 1, gamma)
    ri_x, ri_y = _biv_partials(ri)
    r2_x, r2_y = _biv_partials(r2i1)
    direct = ri_x(half, y0) * r2_y(half, y0) - ri_y(half, y0) * r2_x(half, y0)

    rip1 = r_biv(i + 1, gamma)
    rip1_x, rip1_y = _biv_partials(rip1)
    pim2 = p_biv(i - 2)
    pim2_x, pim2_y = _biv_partials(pim2)
    F = ri_x(half, y0) * rip1_y(half, y0) - ri_y(half, y0) * rip1_x(half, y0)
    G = (pim2(half, y0) * (ri_x(half, y0) + 2 * half * ri_y(half, y0))
         - (half * half - y0) * (ri_x(half, y0) * pim2_y(half, y0)
                                 - ri_y(half, y0) * pim2_x(half, y0)))
    si = s_poly(i, gamma)(y0)
    si1 = s_poly(i + 1, gamma)(y0)
    si2 = s_poly(i + 2, gamma)(y0)
    dsi1 = s_poly(i + 1, gamma).derivative()(y0)
    closed = -2 * si2 * si * dsi1 + si1 * (F + G)
    return direct, closed


def jacobian_general(ell: int, gamma, pts: PerturbedPointSet, *, seed: int = 0,
                     margin_factor: float = 10.0, deadline=None) -> IdentCertificate:
    """Assemble and certify the scaled block Jacobian at the perturbed points.

    The 2l x 2l Jacobian of (x_1, y_1, ..) -> (q_2, q_5, .., q_{2n}, q_{4n+1}, ..)
    is evaluated exactly at (g/2, d_1, .., g/2, d_l), rows are scaled by the
    prescribed products of line values to form B, and det(B) != 0 is
    established in exact rational arithmetic.  Diagnostics carry the float
    agreement margin and a finite-difference cross-check of the raw map.
    """
    if pts.ell != ell:
        raise ValueError("point set size does not match ell")
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("certification requires a rational gamma")
    half = Fraction(gamma, 2)
    d = pts.d
    R = pts.R

    row_indices = []
    for n in range(1, ell + 1):
        row_indices += [2 * n, 4 * n + 1]
    r_polys = {m: r_biv(m, gamma) for m in row_indices}
    r_parts = {m: _biv_partials(p) for m, p in r_polys.items()}
    s_cache = {m: s_poly(m, gamma) for m in range(0, 4 * ell + 3)}

    # factor values r_m(g/2, d_j) = s_{m+1}(d_j), exact
    fvals = {m: [s_cache[m + 1](dj) for dj in d] for m in row_indices}

    J = [[Fraction(0)] * (2 * ell) for _ in range(2 * ell)]
    for row, m in enumerate(row_indices):
        _check_deadline(deadline)
        px, py = r_parts[m]
        for j in range(ell):
            prod = Fraction(1)
            for j2 in range(ell):
                if j2 != j:
                    prod *= fvals[m][j2]
            J[row][2 * j] = prod * px(half, d[j])
            J[row][2 * j + 1] = prod * py(half, d[j])

    scalings = []
    for n in range(1, ell + 1):
        for base in (2 * n + 1, 4 * n + 2):
            scale = s_cache[base](d[n - 1])
            for k in R[n - 1]:
                scale /= s_cache[base](d[k - 1])
            scalings.append(scale)
    B = [[scalings[row] * J[row][col] for col in range(2 * ell)]
         for row in range(2 * ell)]

    det_B = _fraction_det(B)
    det_J = _fraction_det(J)
    if det_B == 0 or det_J == 0:
        raise SingularAtChosenPoint(
            "exact determinant vanished; reselect points with a smaller tolerance"
        )

    # line identity cross-check for every diagonal block, exact
    for n in range(1, ell + 1):
        direct, closed = detj_line_identity(2 * n, gamma, d[n - 1])
        if direct != closed:
            raise AssertionError(
                f"line determinant identity failed for block {n}"
            )

    # float pipeline and finite-difference double entry
    Bf = np.array([[float(v) for v in row] for row in B])
    det_B_float = float(np.linalg.det(Bf))
    prop_err = abs(det_B_float - float(det_B)) + 1e-300
    margin_ratio = abs(float(det_B)) / prop_err
    cond = float(np.linalg.cond(Bf))

    gf = float(gamma)
    point = []
    for j in range(ell):
        point += [gf / 2.0, float(d[j])]

    def raw_map(theta):
        theta = np.asarray(theta, dtype=float)
        xs, ys = theta[0::2], theta[1::2]
        out = []
        for m in row_indices:
            vals = _r_values(m, gf, xs, ys)
            out.append(np.prod(vals))
        return np.array(out)

    J_fd = _fd_jacobian(raw_map, np.array(point), h_rel=1e-7)
    Jf = np.array([[float(v) for v in row] for row in J])
    det_fd = float(np.linalg.det(J_fd))
    det_Jf = float(np.linalg.det(Jf))
    fd_rel = abs(det_fd - det_Jf) / max(abs(det_Jf), 1e-300)
    fd_ok = fd_rel < 0.1

    verdict = "certified" if (margin_ratio > margin_factor and fd_ok) else "not_certified"
    diagnostics = {
        "det_B_exact_nonzero": True,
        "det_J_exact_nonzero": True,
        "det_B_float": det_B_float,
        "margin_ratio": margin_ratio,
        "condition_number": cond,
        "fd_det_rel_dev": fd_rel,
        "scalings": [float(s) for s in scalings],
        "epsilon_cascade": [float(e) for e in pts.eps_cascade],
        "delta": float(pts.delta),
        "seed": seed,
        "line_identity_checked_blocks": ell,
    }
    return IdentCertificate(
        case="general",
        ell=ell,
        gamma=gamma,
        moment_indices=tuple(row_indices),
        eval_point=tuple(point),
        matrix=tuple(tuple(float(v) for v in row) for row in B),
        det_or_rank=float(det_B),
        verdict=verdict,
        diagnostics=diagnostics,
    )


def _r_values(n: int, gamma: float, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(x)
    cur = np.full_like(x, gamma)
    if n == 0:
        return prev
    for _ in range(2, n + 1):
        prev, cur = cur, 2 * x * cur - (x * x - y) * prev
    return cur


# ---------------------------------------------------------------------------
# common zeros of the bivariate family (exact resultants)


@dataclass(frozen=True)
class CommonZeroReport:
    max_i: int
    gamma: object
    resultant_rows: tuple  # (i, j, monomial_degree, ok)
    curve_rows: tuple      # (n, parabola_ok, axis_ok)
    trivial_zero_ok: bool

    @property
    def all_ok(self) -> bool:
        return (self.trivial_zero_ok
                and all(r[3] for r in self.resultant_rows)
                and all(r[1] and r[2] for r in self.curve_rows))


def _det_exact(rows):
    flat = [c for row in rows for c in row]
    if all(isinstance(c, int) for c in flat):
        n = len(rows)
        M = [list(r) for r in rows]
        sign = 1
        prev = 1
        for c in range(n - 1):
            pivot = next((i for i in range(c, n) if M[i][c] != 0), None)
            if pivot is None:
                return 0
            if pivot != c:
                M[c], M[pivot] = M[pivot], M[c]
                sign = -sign
            for i in range(c + 1, n):
                for j in range(c + 1, n):
                    M[i][j] = (M[i][j] * M[c][c] - M[i][c] * M[c][j]) // prev
                M[i][c] = 0
            prev = M[c][c]
        return sign * M[n - 1][n - 1]
    return _fraction_det(rows)


def resultant_y(f: BiPoly, g: BiPoly) -> UniPoly:
    """Exact resultant eliminating y, as a univariate polynomial in x.

    The Sylvester determinant (entries univariate in x) is computed by
    evaluation at integer nodes followed by Newton interpolation.
    """
    fc = f.coeffs_in_y()
    gc = g.coeffs_in_y()
    m, n = len(fc) - 1, len(gc) - 1
    if m < 0 or n < 0:
        raise ValueError("resultant of a zero polynomial")
    size = m + n
    bound = n * max(f.degree_x, 0) + m * max(g.degree_x, 0)
    nodes = []
    values = []
    t = 0
    while len(nodes) <= bound:
        for cand in ((t, -t) if t else (0,)):
            if len(nodes) > bound:
                break
            rows = []
            fv = [c(cand) for c in fc]
            gv = [c(cand) for c in gc]
            for sh in range(n):
                rows.append([0] * sh + fv[::-1] + [0] * (size - sh - m - 1))
            for sh in range(m):
                rows.append([0] * sh + gv[::-1] + [0] * (size - sh - n - 1))
            nodes.append(cand)
            values.append(_det_exact(rows))
        t += 1
    # Newton interpolation on the exact samples
    coeffs_dd = [Fraction(v) for v in values]
    for lead in range(1, len(nodes)):
        for i in range(len(nodes) - 1, lead - 1, -1):
            coeffs_dd[i] = (coeffs_dd[i] - coeffs_dd[i - 1]) / (nodes[i] - nodes[i - lead])
    basis = [Fraction(1)]
    out = [Fraction(0)] * len(nodes)
    for k, dd in enumerate(coeffs_dd):
        for idx, b in enumerate(basis):
            out[idx] += dd * b
        new_basis = [Fraction(0)] * (len(basis) + 1)
        for idx, b in enumerate(basis):
            new_basis[idx] -= nodes[k] * b
            new_basis[idx + 1] += b
        basis = new_basis
    return UniPoly(out, RATIONAL, f.gamma)


def _is_positive_degree_monomial(p: UniPoly) -> tuple:
    nz = [(k, c) for k, c in enumerate(p.coeffs) if c != 0]
    if len(nz) == 1 and nz[0][0] >= 1:
        return True, nz[0][0]
    return False, -1


def common_zero_checks(max_i: int, gamma=1) -> CommonZeroReport:
    """Verify that consecutive and next-consecutive family members share only (0,0).

    For each pair the resultant eliminating y must be a monomial c*x^k (so any
    common zero has x = 0), and on the axis x = 0 the members reduce to pure
    powers of y (so y = 0 follows); (0, 0) itself is checked to be a common
    zero.  Also verifies the closed forms on the curves x = 0 and y = x^2.
    """
    if max_i > 12:
        raise ValueError("resultant degree growth; max_i is capped at 12")
    if max_i < 2:
        raise ValueError("need max_i >= 2")
    if not isinstance(gamma, (int, Fraction)):
        raise BackendMismatch("exact resultants require a rational gamma")

    curve_rows = []
    for n in range(1, max_i + 1):
        rn = r_biv(n, gamma)
        par = rn.on_parabola()
        want = [0] * (n - 1) + [gamma * 2 ** (n - 1)]
        parabola_ok = list(par.coeffs) == want
        axis = rn.restrict_x(0)
        if n % 2 == 0:
            want_axis = [0] * (n // 2) + [1]
        else:
            want_axis = [0] * ((n - 1) // 2) + [gamma]
        axis_ok = list(axis.coeffs) == want_axis
        curve_rows.append((n, parabola_ok, axis_ok))

    trivial_ok = all(
        r_biv(i, gamma)(0, 0) == 0 for i in range(2, max_i + 3)
    )

    res_rows = []
    for i in range(2, max_i + 1):
        for j in (i + 1, i + 2):
            res = resultant_y(r_biv(i, gamma), r_biv(j, gamma))
            ok, k = _is_positive_degree_monomial(res)
            res_rows.append((i, j, k, ok))
    return CommonZeroReport(max_i, gamma, tuple(res_rows), tuple(curve_rows), trivial_ok)


# ---------------------------------------------------------------------------
# engineered rational-function families (rank criterion support)


def point_root_family(points, exponents):
    """Rational functions prod_k (y - eta_k)^(e_ik) from an integer exponent matrix."""
    points = [Fraction(p) for p in points]
    funcs = []
    for row in exponents:
        num = UniPoly((1,), RATIONAL)
        den = UniPoly((1,), RATIONAL)
        for eta, e in zip(points, row):
            lin = UniPoly((-eta, 1), RATIONAL)
            for _ in range(abs(int(e))):
                if e > 0:
                    num = num * lin
                else:
                    den = den * lin
        funcs.append(RationalFunc(num, den))
    return funcs


def symmetric_product_values(funcs, y):
    """q_i(y) = prod_j f_i(y_j) for a float vector y."""
    out = []
    for f in funcs:
        acc = 1.0
        for yj in y:
            acc *= float(f.num(float(yj))) / float(f.den(float(yj)))
        out.append(acc)
    return np.array(out)


def kernel_monomial_is_constant(funcs, kernel, rng, trials: int = 20,
                                rel_tol: float = 1e-10) -> bool:
    """Check that prod_i q_i^(v_i) is constant, via log magnitudes and signs."""
    ell = len(funcs)
    logs = []
    signs = []
    for _ in range(trials):
        y = rng.uniform(2.0, 3.0, ell) + rng.uniform(0, 1, ell) * 5.0
        q = symmetric_product_values(funcs, y)
        if np.any(q == 0):
            continue
        logs.append(sum(v * math.log(abs(qi)) for v, qi in zip(kernel, q)))
        signs.append(math.prod(1 if qi > 0 else -1 for v, qi in zip(kernel, q) if v % 2))
    if len(logs) < 2:
        return False
    spread = max(logs) - min(logs)
    scale = max(1.0, max(abs(v) for v in logs))
    return spread <= rel_tol * scale and len(set(signs)) == 1
