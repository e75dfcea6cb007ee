"""Binary-latent product models: moments, symmetries, gauge fixing, coordinates.

A model is a list of factors (alpha0, alpha1, pi); the chance that n iid
observables are all 1 factorizes as a product of per-factor contributions
pi*alpha1^n + (1-pi)*alpha0^n.  All operations are pure; parameters may be
exact (int/Fraction) or float, and arithmetic follows the inputs.

Probabilities are only range-checked when ingesting user models from JSON:
gauge scaling legitimately pushes the alphas above 1, so internally the
coefficients are just nonnegative reals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasibleXY,
    MissingMoment,
    TrivialModel,
)
from .ioformats import cell_to_number, format_number, number_to_cell, parse_number


def _is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


@dataclass(frozen=True)
class Factor:
    """One latent factor: success coefficients for its two states and the prior."""

    alpha0: object
    alpha1: object
    pi: object

    def __post_init__(self):
        if self.alpha0 < 0 or self.alpha1 < 0:
            raise ValueError("coefficients must be nonnegative")
        if not 0 <= self.pi <= 1:
            raise ValueError("prior must lie in [0, 1]")

    def first_moment(self):
        return self.pi * self.alpha1 + (1 - self.pi) * self.alpha0

    def contribution(self, n: int):
        """This factor's multiplicative contribution to the n-th moment."""
        return self.pi * self.alpha1**n + (1 - self.pi) * self.alpha0**n


@dataclass(frozen=True)
class PoEParams:
    """A full model; ``gamma`` is set once the gauge has been fixed."""

    factors: tuple
    gamma: object = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 1:
            raise ValueError("a model needs at least one factor")

    @property
    def ell(self) -> int:
        return len(self.factors)

    def is_exact(self) -> bool:
        return all(_is_exact(f.alpha0, f.alpha1, f.pi) for f in self.factors)

    def to_json(self) -> str:
        return json.dumps(
            {
                "l": self.ell,
                "factors": [
                    {
                        "alpha0": format_number(f.alpha0) if _is_exact(f.alpha0) else float(f.alpha0),
                        "alpha1": format_number(f.alpha1) if _is_exact(f.alpha1) else float(f.alpha1),
                        "pi": format_number(f.pi) if _is_exact(f.pi) else float(f.pi),
                    }
                    for f in self.factors
                ],
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str, validate: bool = True) -> "PoEParams":
        doc = json.loads(text)
        factors = []
        for raw in doc["factors"]:
            a0 = parse_number(raw["alpha0"])
            a1 = parse_number(raw["alpha1"])
            pi = parse_number(raw["pi"])
            if validate and not (0 <= a0 <= 1 and 0 <= a1 <= 1):
                raise ValueError("ingested coefficients must lie in [0, 1]")
            factors.append(Factor(a0, a1, pi))
        params = PoEParams(tuple(factors))
        if doc.get("l") not in (None, params.ell):
            raise ValueError("factor count does not match the declared size")
        return params


@dataclass(frozen=True)
class XYFactor:
    """Line/parabola coordinates of one factor: x = g - sigma*d, y = d^2."""

    x: object
    y: object

    def __post_init__(self):
        if self.y < 0:
            raise InfeasibleXY("y must be nonnegative (it is a squared half-gap)")


@dataclass(frozen=True)
class MomentSeq:
    """Moments at an explicit, strictly increasing index set."""

    indices: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have matching length")
        if any(i < 0 for i in self.indices):
            raise ValueError("moment indices must be nonnegative")
        if any(a >= b for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("moment indices must be strictly increasing")
        if self.indices and self.indices[0] == 0:
            v0 = self.values[0]
            exact = _is_exact(v0)
            if (exact and v0 != 1) or (not exact and abs(float(v0) - 1.0) > 1e-12):
                raise ValueError("the 0-th moment must equal 1")

    def get(self, index: int):
        try:
            return self.values[self.indices.index(index)]
        except ValueError:
            raise MissingMoment(f"moment at index {index} not available") from None

    def has(self, index: int) -> bool:
        return index in self.indices

    def to_csv(self) -> str:
        lines = ["index,value"]
        lines += [f"{i},{number_to_cell(v)}" for i, v in zip(self.indices, self.values)]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "MomentSeq":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip().lower() != "index,value":
            raise ValueError('moment CSV must start with the header "index,value"')
        idx, vals = [], []
        for ln in lines[1:]:
            i, v = ln.split(",", 1)
            idx.append(int(i))
            vals.append(cell_to_number(v))
        order = sorted(range(len(idx)), key=lambda k: idx[k])
        return MomentSeq(tuple(idx[k] for k in order), tuple(vals[k] for k in order))


# ---------------------------------------------------------------------------
# symmetries


@dataclass(frozen=True)
class SymmetryOp:
    kind: str  # "flip" | "swap" | "gauge"
    j: int
    j2: int = -1
    lam: object = 1

    def __post_init__(self):
        if self.kind not in ("flip", "swap", "gauge"):
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind in ("swap", "gauge") and self.j == self.j2:
            raise ValueError("swap/gauge need two distinct factor indices")
        if self.kind == "gauge" and not self.lam > 0:
            raise ValueError("gauge scaling must be positive")


def flip(j: int) -> SymmetryOp:
    return SymmetryOp("flip", j)


def swap(j: int, j2: int) -> SymmetryOp:
    return SymmetryOp("swap", j, j2)


def gauge(j: int, j2: int, lam) -> SymmetryOp:
    return SymmetryOp("gauge", j, j2, lam)


def apply_symmetry(params: PoEParams, op: SymmetryOp) -> PoEParams:
    """Apply one moment-preserving symmetry; gauge ops unset the fixed gamma."""
    factors = list(params.factors)
    if op.kind == "flip":
        f = factors[op.j]
        factors[op.j] = Factor(f.alpha1, f.alpha0, 1 - f.pi)
        return PoEParams(tuple(factors), params.gamma)
    if op.kind == "swap":
        factors[op.j], factors[op.j2] = factors[op.j2], factors[op.j]
        return PoEParams(tuple(factors), params.gamma)
    f, g = factors[op.j], factors[op.j2]
    factors[op.j] = Factor(f.alpha0 * op.lam, f.alpha1 * op.lam, f.pi)
    factors[op.j2] = Factor(g.alpha0 / op.lam, g.alpha1 / op.lam, g.pi)
    return PoEParams(tuple(factors), None)


# ---------------------------------------------------------------------------
# moments


def moments_uniform(params: PoEParams, max_t: int) -> MomentSeq:
    """Moments 1..max_t under the uniform prior (factor priors are ignored)."""
    if max_t < 1:
        raise ValueError("max_t must be at least 1")
    exact = params.is_exact()
    values = []
    for t in range(1, max_t + 1):
        acc = Fraction(1) if exact else 1.0
        for f in params.factors:
            s = f.alpha0**t + f.alpha1**t
            acc *= Fraction(s, 2) if exact else s / 2.0
        values.append(acc)
    return MomentSeq(tuple(range(1, max_t + 1)), tuple(values))


def moments_general(params: PoEParams, indices) -> MomentSeq:
    """Moments at the given indices via the per-factor product formula."""
    indices = sorted(set(int(i) for i in indices))
    if not indices:
        raise ValueError("need at least one moment index")
    if indices[0] < 0:
        raise ValueError("moment indices must be nonnegative")
    exact = params.is_exact()
    values = []
    for n in indices:
        acc = 1 if exact else 1.0
        for f in params.factors:
            acc *= f.contribution(n)
        values.append(acc)
    return MomentSeq(tuple(indices), tuple(values))


_BRUTEFORCE_MAX_ELL = 20


def moments_bruteforce(params: PoEParams, indices) -> MomentSeq:
    """Oracle: moments by summation over all 2^ell latent configurations."""
    if params.ell > _BRUTEFORCE_MAX_ELL:
        raise ValueError(f"brute force enumerates 2^ell states; ell <= {_BRUTEFORCE_MAX_ELL}")
    indices = sorted(set(int(i) for i in indices))
    if not indices or indices[0] < 0:
        raise ValueError("need nonnegative moment indices")
    support, weights = lumped_distribution(params, merge=False)
    if params.is_exact():
        values = tuple(
            sum(w * v**n for v, w in zip(support, weights)) for n in indices
        )
        return MomentSeq(tuple(indices), values)
    v = np.asarray(support, dtype=float)
    w = np.asarray(weights, dtype=float)
    values = tuple(float(w @ v**n) for n in indices)
    return MomentSeq(tuple(indices), values)


def lumped_distribution(params: PoEParams, merge: bool = True, tol: float = 1e-12):
    """Treat the latents as one variable: (success values, prior weights).

    With ``merge`` the support is sorted and coinciding values are combined.
    """
    if params.ell > _BRUTEFORCE_MAX_ELL:
        raise ValueError(f"lumping enumerates 2^ell states; ell <= {_BRUTEFORCE_MAX_ELL}")
    exact = params.is_exact()
    one = 1 if exact else 1.0
    support, weights = [one], [one]
    for f in params.factors:
        support = [v * f.alpha0 for v in support] + [v * f.alpha1 for v in support]
        weights = [w * (1 - f.pi) for w in weights] + [w * f.pi for w in weights]
    if not merge:
        return support, weights
    order = sorted(range(len(support)), key=lambda k: support[k])
    merged = []
    for k in order:
        v, w = support[k], weights[k]
        if merged and (v == merged[-1][0] or abs(float(v - merged[-1][0])) <= tol):
            merged[-1][1] += w
        else:
            merged.append([v, w])
    return [v for v, _ in merged], [w for _, w in merged]


def hankel_lumped(moments: MomentSeq, n: int) -> np.ndarray:
    """(n+1) x (n+1) matrix with entry (a, b) equal to the moment at a+b."""
    for t in range(2 * n + 1):
        if not moments.has(t):
            raise MissingMoment(f"moment at index {t} required for the order-{n} matrix")
    return np.array(
        [[float(moments.get(a + b)) for b in range(n + 1)] for a in range(n + 1)]
    )


# ---------------------------------------------------------------------------
# gauge fixing and canonical form


def _exact_nth_root(value: Fraction, n: int):
    """Exact n-th root of a positive rational, or None."""
    value = Fraction(value)

    def iroot(m: int):
        if m == 0:
            return 0
        r = round(m ** (1.0 / n))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**n == m:
                return c
        return None

    p = iroot(value.numerator)
    q = iroot(value.denominator)
    if p is None or q is None:
        return None
    return Fraction(p, q)


def gauge_normalize(params: PoEParams) -> PoEParams:
    """Rescale factors so each contributes the same first moment g = q_1^(1/ell).

    Moments are unchanged at every index.  Stays exact when the inputs are
    exact and the root is rational; otherwise falls back to floats.
    """
    firsts = [f.first_moment() for f in params.factors]
    q1 = math.prod(firsts) if not params.is_exact() else math.prod(firsts, start=Fraction(1))
    if q1 == 0:
        raise TrivialModel("the first moment vanishes; nothing to identify")
    gamma = None
    if params.is_exact():
        gamma = _exact_nth_root(Fraction(q1), params.ell)
    if gamma is None:
        gamma = float(q1) ** (1.0 / params.ell)
    factors = []
    for f, m in zip(params.factors, firsts):
        lam = gamma / m
        factors.append(Factor(f.alpha0 * lam, f.alpha1 * lam, f.pi))
    return PoEParams(tuple(factors), gamma)


def to_xy(factor: Factor, gamma) -> XYFactor:
    """Coordinates (x, y) of a gauge-normalized factor.

    x = g - sigma*d with sigma = 2*pi - 1 and d the half-gap; for factors whose
    first moment equals g this is also the coefficient midpoint.
    """
    gap = factor.alpha1 - factor.alpha0
    d = Fraction(gap, 2) if _is_exact(gap) else gap / 2.0
    sigma = 2 * factor.pi - 1
    return XYFactor(gamma - sigma * d, d * d)


def from_xy(xy: XYFactor, gamma) -> Factor:
    """Reconstruct a factor from (x, y); the half-gap sign is fixed nonnegative.

    A zero half-gap leaves the prior unidentifiable and we take pi = 1/2.
    """
    if xy.y < 0:
        raise InfeasibleXY("y must be nonnegative")
    if xy.y == 0:
        if xy.x < 0:
            raise InfeasibleXY("coefficients would be negative")
        return Factor(xy.x, xy.x, Fraction(1, 2) if _is_exact(xy.x) else 0.5)
    if _is_exact(xy.y):
        d = _exact_nth_root(Fraction(xy.y), 2)
        if d is None:
            d = math.sqrt(float(xy.y))
    else:
        d = math.sqrt(xy.y)
    sigma = (gamma - xy.x) / d
    if abs(float(sigma)) > 1 + 1e-12:
        raise InfeasibleXY("the prior would fall outside [0, 1]")
    if not _is_exact(sigma):
        sigma = min(1.0, max(-1.0, float(sigma)))
    if xy.x - d < 0:
        raise InfeasibleXY("coefficients would be negative")
    pi = Fraction(sigma + 1, 2) if _is_exact(sigma) else (sigma + 1) / 2.0
    return Factor(xy.x - d, xy.x + d, pi)


def canonicalize(params: PoEParams) -> PoEParams:
    """Symmetry-orbit representative of gauge-normalized parameters.

    Within each factor the smaller coefficient comes first (flip); factors are
    then sorted by their (x, y) coordinates.  Equal-coefficient factors get
    the prior folded to min(pi, 1-pi), the flip-orbit representative.
    """
    if params.gamma is None:
        raise ValueError("canonicalize expects gauge-normalized parameters")
    fixed = []
    for f in params.factors:
        if f.alpha0 > f.alpha1:
            f = Factor(f.alpha1, f.alpha0, 1 - f.pi)
        elif f.alpha0 == f.alpha1:
            f = Factor(f.alpha0, f.alpha1, min(f.pi, 1 - f.pi))
        fixed.append(f)

    def key(f: Factor):
        xy = to_xy(f, params.gamma)
        return (float(xy.x), float(xy.y), float(f.pi))

    return PoEParams(tuple(sorted(fixed, key=key)), params.gamma)


def compare_up_to_symmetry(a: PoEParams, b: PoEParams) -> float:
    """Max-norm parameter distance after gauge normalization and canonicalization."""
    if a.ell != b.ell:
        raise DimensionMismatch(f"cannot compare models with {a.ell} and {b.ell} factors")
    ca = canonicalize(a if a.gamma is not None else gauge_normalize(a))
    cb = canonicalize(b if b.gamma is not None else gauge_normalize(b))
    dist = 0.0
    for fa, fb in zip(ca.factors, cb.factors):
        dist = max(
            dist,
            abs(float(fa.alpha0 - fb.alpha0)),
            abs(float(fa.alpha1 - fb.alpha1)),
            abs(float(fa.pi - fb.pi)),
        )
    return dist


def random_model(ell: int, rng: np.random.Generator, *, uniform_prior: bool = False,
                 alpha_low: float = 0.05, alpha_high: float = 0.95,
                 pi_low: float = 0.1, pi_high: float = 0.9) -> PoEParams:
    """Random probabilistic model with coefficients bounded away from 0 and 1."""
    factors = []
    for _ in range(ell):
        a0 = float(rng.uniform(alpha_low, alpha_high))
        a1 = float(rng.uniform(alpha_low, alpha_high))
        pi = 0.5 if uniform_prior else float(rng.uniform(pi_low, pi_high))
        factors.append(Factor(a0, a1, pi))
    return PoEParams(tuple(factors))
