"""Polynomial families defined by three-term recurrences, on two numeric backends.

The library works with four related families:

* ``p_uniform(m)``  -- univariate in ``a`` (the product of a factor's two
  coefficients):  p_0 = 1, p_1 = g/2, p_m = g*p_{m-1} - a*p_{m-2}.
* ``r_biv(n)``      -- bivariate in ``(x, y)``:  r_0 = 1, r_1 = g,
  r_n = 2x*r_{n-1} - (x^2 - y)*r_{n-2}.
* ``p_biv(n)``      -- bivariate companions:  p_{-1} = 1, p_0 = 2x, same
  recurrence (no dependence on g).
* ``s_poly(n)``     -- univariate in ``y``, the restriction of the bivariate
  family to the line x = g/2:  s_0 = 0, s_1 = 1,
  s_n = g*s_{n-1} - (g^2/4 - y)*s_{n-2}.

Backends: ``"rational"`` stores exact ``int``/``Fraction`` coefficients and is
used for every algebraic identity; ``"float"`` stores machine floats and is
used for root refinement and Jacobians.  The constant ``g`` is baked into the
coefficients at construction time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import BackendMismatch
from .ioformats import format_number, parse_number

RATIONAL = "rational"
FLOAT = "float"

_FLOAT_COEFF_RTOL = 1e-9  # coefficient-wise tolerance, scaled by max |coeff|


def _check_backend(backend):
    if backend not in (RATIONAL, FLOAT):
        raise BackendMismatch(f"unknown backend {backend!r}")


def _coerce(value, backend):
    if backend == FLOAT:
        return float(value)
    if isinstance(value, (int, Fraction)):
        return value
    raise BackendMismatch(
        f"rational backend needs int/Fraction coefficients, got {type(value).__name__}"
    )


def _strip(coeffs):
    n = len(coeffs)
    while n > 0 and coeffs[n - 1] == 0:
        n -= 1
    return tuple(coeffs[:n])


# ---------------------------------------------------------------------------
# univariate polynomials


@dataclass(frozen=True)
class UniPoly:
    """Dense univariate polynomial, coefficients in ascending degree.

    The zero polynomial is the empty tuple; otherwise the last stored
    coefficient is nonzero.  ``gamma`` records the family constant baked into
    the coefficients (``None`` for polynomials not tied to a family).
    """

    coeffs: tuple
    backend: str = RATIONAL
    gamma: object = None

    def __post_init__(self):
        _check_backend(self.backend)
        object.__setattr__(
            self, "coeffs", _strip(tuple(_coerce(c, self.backend) for c in self.coeffs))
        )

    # -- basic shape --------------------------------------------------------

    @property
    def degree(self) -> int:
        """Degree, with the zero polynomial at -1."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int):
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return 0.0 if self.backend == FLOAT else 0

    def leading(self):
        if self.is_zero():
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    # -- ring operations ----------------------------------------------------

    def _binop_check(self, other):
        if not isinstance(other, UniPoly):
            raise TypeError("expected UniPoly")
        if other.backend != self.backend:
            raise BackendMismatch("mixed polynomial backends")

    def __add__(self, other):
        self._binop_check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        out = [self.coeff(k) + other.coeff(k) for k in range(n)]
        return UniPoly(out, self.backend, self.gamma)

    def __sub__(self, other):
        self._binop_check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        out = [self.coeff(k) - other.coeff(k) for k in range(n)]
        return UniPoly(out, self.backend, self.gamma)

    def __neg__(self):
        return UniPoly([-c for c in self.coeffs], self.backend, self.gamma)

    def __mul__(self, other):
        if isinstance(other, UniPoly):
            self._binop_check(other)
            if self.is_zero() or other.is_zero():
                return UniPoly((), self.backend, self.gamma)
            out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                if a == 0:
                    continue
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
            return UniPoly(out, self.backend, self.gamma)
        scalar = _coerce(other, self.backend)
        return UniPoly([c * scalar for c in self.coeffs], self.backend, self.gamma)

    __rmul__ = __mul__

    def shift_up(self, k: int):
        """Multiply by the variable to the k-th power."""
        if self.is_zero():
            return self
        zero = 0.0 if self.backend == FLOAT else 0
        return UniPoly((zero,) * k + self.coeffs, self.backend, self.gamma)

    def derivative(self):
        return UniPoly(
            [k * c for k, c in enumerate(self.coeffs)][1:], self.backend, self.gamma
        )

    def divmod(self, other):
        """Exact-arithmetic polynomial division (rational backend only)."""
        self._binop_check(other)
        if self.backend != RATIONAL:
            raise BackendMismatch("polynomial division requires the rational backend")
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        den = other.coeffs
        dq = len(rem) - len(den)
        if dq < 0:
            return UniPoly((), RATIONAL, self.gamma), self
        quot = [0] * (dq + 1)
        lead = Fraction(den[-1]) if not isinstance(den[-1], Fraction) else den[-1]
        for k in range(dq, -1, -1):
            c = Fraction(rem[k + len(den) - 1]) / lead
            quot[k] = c
            if c != 0:
                for j, b in enumerate(den):
                    rem[k + j] -= c * b
        return (
            UniPoly(quot, RATIONAL, self.gamma),
            UniPoly(rem[: len(den) - 1], RATIONAL, self.gamma),
        )

    def monic(self):
        if self.is_zero():
            return self
        lead = self.leading()
        if self.backend == RATIONAL:
            lead = Fraction(lead)
        return UniPoly([c / lead for c in self.coeffs], self.backend, self.gamma)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, point):
        """Horner evaluation; exact when backend and point are both rational."""
        acc = 0.0 if self.backend == FLOAT else 0
        for c in reversed(self.coeffs):
            acc = acc * point + c
        return acc

    def sign_at(self, point: Fraction) -> int:
        """Exact sign at a rational point (rational backend only).

        Clears denominators so the computation is pure integer arithmetic,
        which keeps deep bisection runs fast: with point p/q and integerized
        coefficients c_i, the sign equals that of sum_i c_i p^i q^(deg-i).
        """
        if self.backend != RATIONAL:
            raise BackendMismatch("exact signs require the rational backend")
        if self.is_zero():
            return 0
        ints = _integerized(self.coeffs)
        point = Fraction(point)
        p, q = point.numerator, point.denominator
        total = 0
        qk = 1
        for c in reversed(ints):
            total = total * p + c * qk
            qk *= q
        return (total > 0) - (total < 0)

    def cauchy_bound(self):
        """Bound B with all real roots inside (-B, B)."""
        if self.degree < 1:
            raise ValueError("constant polynomial has no root bound")
        lead = self.leading()
        if self.backend == FLOAT:
            return 1.0 + max(abs(c) for c in self.coeffs[:-1]) / abs(lead)
        lead = Fraction(lead)
        return 1 + max(abs(Fraction(c)) for c in self.coeffs[:-1]) / abs(lead)

    # -- conversions --------------------------------------------------------

    def to_float(self):
        return UniPoly([float(c) for c in self.coeffs], FLOAT,
                       None if self.gamma is None else float(self.gamma))

    def allclose(self, other, rtol: float = _FLOAT_COEFF_RTOL) -> bool:
        """Coefficient-wise comparison with tolerance scaled by the largest coefficient."""
        a = self.to_float() if self.backend == RATIONAL else self
        b = other.to_float() if other.backend == RATIONAL else other
        n = max(len(a.coeffs), len(b.coeffs))
        scale = max([abs(c) for c in a.coeffs + b.coeffs] + [1.0])
        return all(abs(a.coeff(k) - b.coeff(k)) <= rtol * scale for k in range(n))

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma": None if self.gamma is None else format_number(self.gamma),
                "backend": self.backend,
                "coeffs": [format_number(c) if self.backend == RATIONAL else float(c)
                           for c in self.coeffs],
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "UniPoly":
        doc = json.loads(text)
        backend = doc.get("backend", RATIONAL)
        coeffs = [parse_number(c) for c in doc["coeffs"]]
        gamma = None if doc.get("gamma") is None else parse_number(doc["gamma"])
        if backend == FLOAT:
            coeffs = [float(c) for c in coeffs]
            gamma = None if gamma is None else float(gamma)
        return UniPoly(coeffs, backend, gamma)


@lru_cache(maxsize=None)
def _integerized(coeffs: tuple) -> tuple:
    """Scale rational coefficients by the lcm of denominators; sign-preserving."""
    lcm = 1
    for c in coeffs:
        if isinstance(c, Fraction):
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    return tuple(int(c * lcm) for c in coeffs)


def unipoly_one(backend=RATIONAL, gamma=None) -> UniPoly:
    return UniPoly((1,), backend, gamma)


# ---------------------------------------------------------------------------
# bivariate polynomials


@dataclass(frozen=True)
class BiPoly:
    """Dense bivariate polynomial; ``coeffs[i][j]`` multiplies x^i y^j."""

    coeffs: tuple
    backend: str = RATIONAL
    gamma: object = None

    def __post_init__(self):
        _check_backend(self.backend)
        rows = [tuple(_coerce(c, self.backend) for c in row) for row in self.coeffs]
        # trim all-zero trailing rows/columns to a canonical dense shape
        while rows and all(c == 0 for c in rows[-1]):
            rows.pop()
        if rows:
            width = max(len(r) for r in rows)
            rows = [r + (0,) * (width - len(r)) for r in rows]
            while width > 1 and all(r[width - 1] == 0 for r in rows):
                width -= 1
                rows = [r[:width] for r in rows]
        object.__setattr__(self, "coeffs", tuple(rows))

    @property
    def degree_x(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree_y(self) -> int:
        return max((len(r) - 1 for r in self.coeffs), default=-1)

    @property
    def total_degree(self) -> int:
        best = -1
        for i, row in enumerate(self.coeffs):
            for j, c in enumerate(row):
                if c != 0:
                    best = max(best, i + j)
        return best

    def is_zero(self) -> bool:
        return not self.coeffs

    def _binop_check(self, other):
        if other.backend != self.backend:
            raise BackendMismatch("mixed polynomial backends")

    def __add__(self, other):
        self._binop_check(other)
        nx = max(len(self.coeffs), len(other.coeffs))
        ny = max(self.degree_y, other.degree_y) + 1
        out = [[0] * ny for _ in range(nx)]
        for src in (self.coeffs, other.coeffs):
            for i, row in enumerate(src):
                for j, c in enumerate(row):
                    out[i][j] += c
        return BiPoly(out, self.backend, self.gamma)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return BiPoly([[-c for c in row] for row in self.coeffs], self.backend, self.gamma)

    def __mul__(self, other):
        if isinstance(other, BiPoly):
            self._binop_check(other)
            if self.is_zero() or other.is_zero():
                return BiPoly((), self.backend, self.gamma)
            nx = self.degree_x + other.degree_x + 1
            ny = self.degree_y + other.degree_y + 1
            out = [[0] * ny for _ in range(nx)]
            for i, row in enumerate(self.coeffs):
                for j, a in enumerate(row):
                    if a == 0:
                        continue
                    for k, orow in enumerate(other.coeffs):
                        for l, b in enumerate(orow):
                            if b != 0:
                                out[i + k][j + l] += a * b
            return BiPoly(out, self.backend, self.gamma)
        scalar = _coerce(other, self.backend)
        return BiPoly([[c * scalar for c in row] for row in self.coeffs],
                      self.backend, self.gamma)

    __rmul__ = __mul__

    def __call__(self, x, y):
        """Evaluate via nested Horner (inner variable y, outer x)."""
        acc = 0.0 if self.backend == FLOAT else 0
        for row in reversed(self.coeffs):
            inner = 0.0 if self.backend == FLOAT else 0
            for c in reversed(row):
                inner = inner * y + c
            acc = acc * x + inner
        return acc

    def partial_x(self):
        return BiPoly(
            [[i * c for c in row] for i, row in enumerate(self.coeffs)][1:],
            self.backend, self.gamma,
        )

    def partial_y(self):
        return BiPoly(
            [[j * c for j, c in enumerate(row)][1:] for row in self.coeffs],
            self.backend, self.gamma,
        )

    def restrict_x(self, x0) -> UniPoly:
        """Substitute x = x0, producing a univariate polynomial in y."""
        x0 = _coerce(x0, self.backend)
        ny = self.degree_y + 1
        out = [0] * max(ny, 0)
        power = 1
        for i, row in enumerate(self.coeffs):
            if i:
                power = power * x0
            for j, c in enumerate(row):
                if c != 0:
                    out[j] += c * power
        return UniPoly(out, self.backend, self.gamma)

    def on_parabola(self) -> UniPoly:
        """Substitute y = x^2, producing a univariate polynomial in x."""
        nx = self.degree_x + 2 * self.degree_y + 1
        out = [0] * max(nx, 0)
        for i, row in enumerate(self.coeffs):
            for j, c in enumerate(row):
                if c != 0:
                    out[i + 2 * j] += c
        return UniPoly(out, self.backend, self.gamma)

    def coeffs_in_y(self) -> list:
        """View as a polynomial in y with UniPoly-in-x coefficients."""
        ny = self.degree_y + 1
        cols = []
        for j in range(max(ny, 0)):
            col = [row[j] if j < len(row) else 0 for row in self.coeffs]
            cols.append(UniPoly(col, self.backend, self.gamma))
        while cols and cols[-1].is_zero():
            cols.pop()
        return cols

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma": None if self.gamma is None else format_number(self.gamma),
                "backend": self.backend,
                "coeffs": [[format_number(c) if self.backend == RATIONAL else float(c)
                            for c in row] for row in self.coeffs],
            },
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# family constructors


def _family_gamma(gamma, backend):
    if backend == FLOAT:
        return float(gamma)
    if isinstance(gamma, (int, Fraction)):
        return gamma
    raise BackendMismatch("rational backend requires an int or Fraction gamma")


@lru_cache(maxsize=None)
def p_uniform(m: int, gamma, backend: str = RATIONAL) -> UniPoly:
    """m-th member of the univariate family in a: p_m = g*p_{m-1} - a*p_{m-2}."""
    if m < 0:
        raise ValueError("index must be nonnegative")
    g = _family_gamma(gamma, backend)
    if gamma <= 0:
        raise ValueError("family constant must be positive")
    if m == 0:
        return UniPoly((1,), backend, g)
    half = g / 2 if backend == FLOAT else Fraction(g, 2)
    if m == 1:
        return UniPoly((half,), backend, g)
    prev2 = p_uniform(m - 2, gamma, backend)
    prev1 = p_uniform(m - 1, gamma, backend)
    return (g * prev1) - prev2.shift_up(1)


@lru_cache(maxsize=None)
def r_biv(n: int, gamma, backend: str = RATIONAL) -> BiPoly:
    """n-th member of the bivariate family: r_n = 2x*r_{n-1} - (x^2 - y)*r_{n-2}."""
    if n < 0:
        raise ValueError("index must be nonnegative")
    g = _family_gamma(gamma, backend)
    if n == 0:
        return BiPoly(((1,),), backend, g)
    if n == 1:
        return BiPoly(((g,),), backend, g)
    return _step_biv(r_biv(n - 1, gamma, backend), r_biv(n - 2, gamma, backend))


@lru_cache(maxsize=None)
def p_biv(n: int, backend: str = RATIONAL) -> BiPoly:
    """Companion bivariate family: p_{-1} = 1, p_0 = 2x, same recurrence."""
    if n < -1:
        raise ValueError("index must be at least -1")
    if n == -1:
        return BiPoly(((1,),), backend, None)
    if n == 0:
        two = 2.0 if backend == FLOAT else 2
        return BiPoly(((0,), (two,)), backend, None)
    return _step_biv(p_biv(n - 1, backend), p_biv(n - 2, backend))


def _step_biv(prev1: BiPoly, prev2: BiPoly) -> BiPoly:
    backend = prev1.backend
    two = 2.0 if backend == FLOAT else 2
    two_x = BiPoly(((0,), (two,)), backend, prev1.gamma)
    one = 1.0 if backend == FLOAT else 1
    x2_minus_y = BiPoly(((0, -one), (0,), (one,)), backend, prev1.gamma)
    return two_x * prev1 - x2_minus_y * prev2


@lru_cache(maxsize=None)
def s_poly(n: int, gamma, backend: str = RATIONAL) -> UniPoly:
    """Line-restricted family in y: s_n = g*s_{n-1} - (g^2/4 - y)*s_{n-2}."""
    if n < 0:
        raise ValueError("index must be nonnegative")
    g = _family_gamma(gamma, backend)
    if gamma <= 0:
        raise ValueError("family constant must be positive")
    if n == 0:
        return UniPoly((), backend, g)
    if n == 1:
        return UniPoly((1,), backend, g)
    quarter = g * g / 4 if backend == FLOAT else Fraction(g * g, 4)
    prev1 = s_poly(n - 1, gamma, backend)
    prev2 = s_poly(n - 2, gamma, backend)
    return (g * prev1) - (quarter * prev2) + prev2.shift_up(1)


# ---------------------------------------------------------------------------
# recurrence evaluation (fast oracle paths; work on scalars or numpy arrays)


def eval_p_uniform_series(a, gamma, max_m: int):
    """Values [p_0(a), ..., p_max(a)] straight from the recurrence."""
    half = gamma / 2 if isinstance(gamma, float) else Fraction(gamma, 2)
    out = [a * 0 + 1, a * 0 + half]
    for _ in range(2, max_m + 1):
        out.append(gamma * out[-1] - a * out[-2])
    return out[: max_m + 1]


def eval_r_series(x, y, gamma, max_n: int):
    """Values [r_0(x,y), ..., r_max(x,y)] straight from the recurrence."""
    out = [x * 0 + 1, x * 0 + gamma]
    for _ in range(2, max_n + 1):
        out.append(2 * x * out[-1] - (x * x - y) * out[-2])
    return out[: max_n + 1]


def eval_s_series(y, gamma, max_n: int):
    """Values [s_0(y), ..., s_max(y)] straight from the recurrence."""
    quarter = gamma * gamma / 4 if isinstance(gamma, float) else Fraction(gamma * gamma, 4)
    out = [y * 0, y * 0 + 1]
    for _ in range(2, max_n + 1):
        out.append(gamma * out[-1] - (quarter - y) * out[-2])
    return out[: max_n + 1]


# ---------------------------------------------------------------------------
# structural identity checks (exact, rational backend)


def check_p12(n: int, k: int, gamma=1) -> bool:
    """Splitting identity for both bivariate families at split position k.

    Verifies r_n = p_k r_{n-k-1} - (x^2-y) p_{k-1} r_{n-k-2} and the same
    shape with r replaced by p throughout, as exact coefficient equalities.
    """
    if not 0 <= k <= n - 1:
        raise IndexError(f"k must satisfy 0 <= k <= n-1, got k={k}, n={n}")
    x2_minus_y = BiPoly(((0, -1), (0,), (1,)), RATIONAL, None)
    pk = p_biv(k)
    pk1 = p_biv(k - 1)
    r_rhs = (_with_gamma(pk, gamma) * r_biv(n - k - 1, gamma)
             - _with_gamma(x2_minus_y * pk1, gamma) * r_biv(n - k - 2, gamma))
    p_rhs = pk * p_biv(n - k - 1) - x2_minus_y * pk1 * p_biv(n - k - 2)
    return (r_biv(n, gamma).coeffs == r_rhs.coeffs
            and p_biv(n).coeffs == p_rhs.coeffs)


def _with_gamma(poly: BiPoly, gamma) -> BiPoly:
    return BiPoly(poly.coeffs, poly.backend, gamma)


def check_c21(n: int, k: int, gamma=1) -> bool:
    """Splitting identity on the line: s_n = s_k s_{n-k+1} - (g^2/4 - y) s_{k-1} s_{n-k}."""
    if not 2 <= k <= n - 1:
        raise IndexError(f"k must satisfy 2 <= k <= n-1, got k={k}, n={n}")
    quarter = Fraction(gamma * gamma, 4)
    factor = UniPoly((-quarter, 1), RATIONAL, gamma)
    lhs = s_poly(n, gamma)
    rhs = s_poly(k, gamma) * s_poly(n - k + 1, gamma) + factor * s_poly(k - 1, gamma) * s_poly(n - k, gamma)
    return lhs.coeffs == rhs.coeffs


def line_restriction_checks(n: int, gamma=1) -> bool:
    """Exact identities tying the bivariate families to s_n on the line x = g/2."""
    if n < 1:
        raise ValueError("index must be at least 1")
    half = Fraction(gamma, 2)
    init_a = p_biv(-1).restrict_x(half).coeffs == r_biv(0, gamma).restrict_x(half).coeffs
    init_b = p_biv(0).restrict_x(half).coeffs == r_biv(1, gamma).restrict_x(half).coeffs
    s_n = s_poly(n, gamma)
    r_line = r_biv(n - 1, gamma).restrict_x(half)
    p_line = p_biv(n - 2).restrict_x(half)
    return init_a and init_b and r_line.coeffs == s_n.coeffs and p_line.coeffs == s_n.coeffs
