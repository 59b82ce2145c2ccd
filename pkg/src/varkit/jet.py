"""Exact expressions over a finite-order jet space.

Coordinates are ``x^i`` on the base and ``u^alpha_I`` on the fibres, where
``I`` is a nondecreasing tuple of base indices (0-based here).  Expressions
are plain sympy expressions in these symbols; the canonical form is the fully
expanded sum with exact rational coefficients.  Smooth atoms (sin, cos, exp)
may only take arguments in the base coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy as sp

ATOMS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}

DEFAULT_MAX_ORDER = 6
EQUALITY_SAMPLES = 20
EQUALITY_RTOL = 1e-9

_default_seed = 0


def set_default_seed(seed: int) -> None:
    """Seed used by randomized zero tests when no generator is passed."""
    global _default_seed
    _default_seed = int(seed)


class JetError(ValueError):
    """Base class for errors raised by the symbolic layer."""


class CapacityError(JetError):
    """An operation needs a jet order beyond ``JetSpace.max_order``."""

    def __init__(self, needed: int, available: int, what: str = "operation"):
        super().__init__(
            f"{what} needs jet order {needed}, but the jet space only holds "
            f"order {available}; raise max_order to at least {needed}"
        )
        self.needed = needed
        self.available = available


class UnsupportedInputError(JetError):
    """The input falls outside the rational + x-atom expression fragment."""


def sort_index(index: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(index))


def index_weight(index: Sequence[int]) -> sp.Rational:
    """``l_1! ... l_n! / l!`` for the multiplicities of ``index``."""
    counts: dict[int, int] = {}
    for i in index:
        counts[i] = counts.get(i, 0) + 1
    num = reduce(lambda acc, c: acc * math.factorial(c), counts.values(), 1)
    return sp.Rational(num, math.factorial(len(index)))


@dataclass(frozen=True)
class JetSpace:
    """Adapted coordinates ``(x^i, u^alpha_I)`` with ``|I| <= max_order``."""

    base: tuple[str, ...]
    fiber: tuple[str, ...]
    max_order: int = DEFAULT_MAX_ORDER
    _coords: dict = field(init=False, repr=False, compare=False, hash=False)
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)
    _x: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "fiber", tuple(self.fiber))
        if len(self.base) < 1 or len(self.fiber) < 1:
            raise JetError("a jet space needs n >= 1 base and m >= 1 fibre coordinates")
        if self.max_order < 2:
            raise JetError("max_order must be at least 2")
        names = self.base + self.fiber
        if len(set(names)) != len(names):
            raise JetError(f"duplicate coordinate names in {names}")
        coords = {}
        lookup = {}
        for alpha, fname in enumerate(self.fiber):
            for order in range(self.max_order + 1):
                for index in combinations_with_replacement(range(self.n), order):
                    sym = sp.Symbol(self.coordinate_name(alpha, index))
                    coords[(alpha, index)] = sym
                    lookup[sym] = (alpha, index)
        object.__setattr__(self, "_coords", coords)
        object.__setattr__(self, "_lookup", lookup)
        object.__setattr__(self, "_x", tuple(sp.Symbol(b) for b in self.base))

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def m(self) -> int:
        return len(self.fiber)

    @property
    def x(self) -> tuple[sp.Symbol, ...]:
        return self._x

    def with_order(self, max_order: int) -> "JetSpace":
        return JetSpace(self.base, self.fiber, max_order)

    def coordinate_name(self, alpha: int, index: Sequence[int]) -> str:
        if not index:
            return self.fiber[alpha]
        return self.fiber[alpha] + "_" + "".join(self.base[i] for i in sort_index(index))

    def coord(self, alpha: int, index: Sequence[int] = ()) -> sp.Symbol:
        key = (alpha, sort_index(index))
        if len(key[1]) > self.max_order:
            raise CapacityError(len(key[1]), self.max_order, "coordinate")
        try:
            return self._coords[key]
        except KeyError:
            raise JetError(f"no coordinate for fibre {alpha}, index {index}") from None

    def u(self, alpha: int = 0, *index: int) -> sp.Symbol:
        return self.coord(alpha, index)

    def lookup(self, sym) -> tuple[int, tuple[int, ...]] | None:
        return self._lookup.get(sym)

    def multi_indices(self, order: int) -> list[tuple[int, ...]]:
        return list(combinations_with_replacement(range(self.n), order))

    def coords_of_order(self, order: int) -> list[sp.Symbol]:
        return [self._coords[(a, I)] for a in range(self.m) for I in self.multi_indices(order)]

    def jet_symbols(self, e) -> list[tuple[sp.Symbol, int, tuple[int, ...]]]:
        """Jet coordinates occurring in ``e`` in graded order (order, fibre, index)."""
        found = []
        for s in sp.sympify(e).free_symbols:
            key = self._lookup.get(s)
            if key is not None:
                found.append((s, key[0], key[1]))
        found.sort(key=lambda t: (len(t[2]), t[1], t[2]))
        return found


def canonical(e) -> sp.Expr:
    """Expanded form; idempotent and unique for the rational fragment."""
    return sp.expand(sp.sympify(e))


def check_fragment(space: JetSpace, e) -> None:
    """Raise unless every smooth atom in ``e`` is applied to a pure-x argument."""
    e = sp.sympify(e)
    for f in e.atoms(sp.Function):
        if f.func not in ATOMS.values():
            raise UnsupportedInputError(f"unsupported function {f.func}")
        if space.jet_symbols(f):
            raise UnsupportedInputError(f"{f} applies a smooth atom to fibre coordinates")
    for p in e.atoms(sp.Pow):
        if space.jet_symbols(p.exp):
            raise UnsupportedInputError(f"{p} has a fibre-dependent exponent")


def total_derivative(space: JetSpace, e, i: int) -> sp.Expr:
    """``D_i e = d_i e + sum_I u^alpha_{I+i} de/du^alpha_I``."""
    e = sp.sympify(e)
    out = sp.diff(e, space.x[i])
    for sym, alpha, index in space.jet_symbols(e):
        de = sp.diff(e, sym)
        if de == 0:
            continue
        if len(index) + 1 > space.max_order:
            raise CapacityError(len(index) + 1, space.max_order, "total derivative")
        out += space.coord(alpha, index + (i,)) * de
    return sp.expand(out)


def total_derivatives(space: JetSpace, e, index: Sequence[int]) -> sp.Expr:
    for i in index:
        e = total_derivative(space, e, i)
    return e


def weighted_partial(space: JetSpace, e, alpha: int, index: Sequence[int] = ()) -> sp.Expr:
    """``(l_1!...l_n!/l!) d e / d u^alpha_I``; symmetric in ``index``."""
    if len(index) > space.max_order:
        raise CapacityError(len(index), space.max_order, "weighted partial")
    if any(not 0 <= i < space.n for i in index):
        raise JetError(f"multi-index {tuple(index)} out of range for n={space.n}")
    return sp.expand(index_weight(index) * sp.diff(sp.sympify(e), space.coord(alpha, index)))


def order_of(space: JetSpace, e) -> int:
    syms = space.jet_symbols(canonical(e))
    return max((len(index) for _, _, index in syms), default=0)


def degree_in_order(space: JetSpace, e, r: int) -> int:
    """Joint polynomial degree of ``e`` in the order-``r`` coordinates."""
    e = canonical(e)
    gens = [s for s, _, index in space.jet_symbols(e) if len(index) == r]
    if not gens:
        return 0
    try:
        return sp.Poly(e, *gens).total_degree()
    except sp.PolynomialError as exc:
        raise UnsupportedInputError(f"{e} is not polynomial in order-{r} coordinates") from exc


def is_polynomial_in_fibres(space: JetSpace, e) -> bool:
    gens = [s for s, _, _ in space.jet_symbols(e)]
    if not gens:
        return True
    try:
        sp.Poly(canonical(e), *gens)
    except sp.PolynomialError:
        return False
    return True


@dataclass(frozen=True)
class SectionPolynomial:
    """Polynomial section ``u^alpha = s^alpha(x)`` with rational coefficients."""

    space: JetSpace
    components: tuple

    def __post_init__(self):
        comps = tuple(sp.nsimplify(sp.sympify(c), rational=True) for c in self.components)
        if len(comps) != self.space.m:
            raise JetError(f"section needs {self.space.m} components, got {len(comps)}")
        for c in comps:
            if self.space.jet_symbols(c) or not c.free_symbols <= set(self.space.x):
                raise JetError(f"section component {c} must depend on x only")
            try:
                sp.Poly(c, *self.space.x)
            except sp.PolynomialError as exc:
                raise JetError(f"section component {c} is not a polynomial") from exc
        object.__setattr__(self, "components", comps)

    def derivative(self, alpha: int, index: Sequence[int]) -> sp.Expr:
        s = self.components[alpha]
        for i in index:
            s = sp.diff(s, self.space.x[i])
        return s


def pullback(space: JetSpace, e, section: SectionPolynomial) -> sp.Expr:
    """Substitute ``u^alpha_I -> d^I s^alpha`` exactly."""
    e = sp.sympify(e)
    subs = {sym: section.derivative(alpha, index) for sym, alpha, index in space.jet_symbols(e)}
    return sp.expand(e.xreplace(subs))


# -- numeric evaluation -------------------------------------------------------

def random_point(space: JetSpace, symbols: Iterable[sp.Symbol], rng: np.random.Generator,
                 low: float = -2.0, high: float = 2.0) -> dict:
    return {s: float(rng.uniform(low, high)) for s in symbols}


def _term_values(e: sp.Expr, symbols: list, values: list) -> list[float]:
    terms = sp.Add.make_args(e)
    f = sp.lambdify(symbols, list(terms), modules="math")
    return [float(v) for v in f(*values)]


def evaluate(e, point: Mapping) -> float:
    e = sp.sympify(e)
    symbols = sorted(e.free_symbols, key=str)
    return float(sp.lambdify(symbols, e, modules="math")(*[point[s] for s in symbols]))


def _has_atoms(e: sp.Expr) -> bool:
    return bool(e.atoms(sp.Function)) or any(
        not (p.exp.is_Integer) for p in e.atoms(sp.Pow)
    ) or e.has(sp.pi, sp.E)


@dataclass(frozen=True)
class Equality:
    """Outcome of an equality test; truthy when equal."""

    equal: bool
    probabilistic: bool = False

    def __bool__(self) -> bool:
        return self.equal


def randomized_zero(e, trials: int = EQUALITY_SAMPLES, rng: np.random.Generator | None = None,
                    rtol: float = EQUALITY_RTOL) -> bool:
    """True iff ``|e| <= rtol * (1 + max |term|)`` at ``trials`` random points in [-2, 2]."""
    e = canonical(e)
    if e == 0:
        return True
    rng = np.random.default_rng(_default_seed) if rng is None else rng
    symbols = sorted(e.free_symbols, key=str)
    for _ in range(trials):
        values = [float(rng.uniform(-2.0, 2.0)) for _ in symbols]
        terms = _term_values(e, symbols, values)
        if not all(math.isfinite(t) for t in terms):
            return False
        if abs(sum(terms)) > rtol * (1.0 + max(abs(t) for t in terms)):
            return False
    return True


def is_zero(e, rng: np.random.Generator | None = None) -> Equality:
    """Exact test on the canonical form, random evaluation only when atoms block it."""
    e = canonical(e)
    if e == 0:
        return Equality(True)
    if not _has_atoms(e):
        return Equality(False)
    return Equality(randomized_zero(e, EQUALITY_SAMPLES, rng), probabilistic=True)


def equals(a, b, rng: np.random.Generator | None = None) -> Equality:
    return is_zero(sp.sympify(a) - sp.sympify(b), rng)


# -- stable text --------------------------------------------------------------

def _term_key(space: JetSpace | None, term: sp.Expr):
    if space is None:
        return (0, str(term))
    powers = []
    for s, p in term.as_powers_dict().items():
        key = space.lookup(s)
        if key is not None:
            powers.append((len(key[1]), key[0], key[1], int(p) if p.is_Integer else 0))
    powers.sort(reverse=True)
    return (tuple(powers), str(term))


def to_text(e, space: JetSpace | None = None) -> str:
    """Deterministic text form, terms in graded order, highest jet order first."""
    e = canonical(e)
    if e == 0:
        return "0"
    terms = sorted(sp.Add.make_args(e), key=lambda t: _term_key(space, t), reverse=True)
    out = ""
    for k, t in enumerate(terms):
        s = sp.sstr(t)
        if k == 0:
            out = s
        elif s.startswith("-"):
            out += " - " + s[1:]
        else:
            out += " + " + s
    return out
