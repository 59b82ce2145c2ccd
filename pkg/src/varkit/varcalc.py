"""Variational operators: Euler-Lagrange, total divergence, Helmholtz, Vainberg-Tonti."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

import sympy as sp

from .jet import (
    CapacityError,
    JetError,
    JetSpace,
    UnsupportedInputError,
    canonical,
    degree_in_order,
    is_zero,
    order_of,
    total_derivative,
    total_derivatives,
    weighted_partial,
)


class UnsupportedOrderError(JetError):
    """Helmholtz machinery is only defined here for source forms of order <= 2."""


class SmoothnessError(JetError):
    """dE/du_x is not divisible by u_x, so no smooth Lagrangian reconstruction exists."""


class ResonanceError(SmoothnessError):
    """Terms of degree one in u_x; the formal solution involves u_x*log(u_x)."""


@dataclass(frozen=True)
class LagrangeForm:
    space: JetSpace
    L: sp.Expr

    def __post_init__(self):
        object.__setattr__(self, "L", canonical(self.L))


@dataclass(frozen=True)
class SourceForm:
    space: JetSpace
    f: tuple

    def __post_init__(self):
        f = tuple(canonical(c) for c in self.f)
        if len(f) != self.space.m:
            raise JetError(f"source form needs {self.space.m} coefficients, got {len(f)}")
        object.__setattr__(self, "f", f)

    @property
    def order(self) -> int:
        return max(order_of(self.space, c) for c in self.f)

    def __getitem__(self, alpha: int) -> sp.Expr:
        return self.f[alpha]

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.f)


@dataclass(frozen=True)
class CurrentDensity:
    space: JetSpace
    J: tuple

    def __post_init__(self):
        J = tuple(canonical(c) for c in self.J)
        if len(J) != self.space.n:
            raise JetError(f"current density needs {self.space.n} components, got {len(J)}")
        object.__setattr__(self, "J", J)


@dataclass
class HelmholtzTensor:
    """``H[a][b]``, ``Hi[i][a][b]`` and ``Hij[i][j][a][b]``."""

    space: JetSpace
    H: list
    Hi: list
    Hij: list

    def components(self):
        """Yield ``(kind, indices, expr)`` in the order H^{ij}, H^i, H."""
        n, m = self.space.n, self.space.m
        for i in range(n):
            for j in range(i, n):
                for a, b in product(range(m), repeat=2):
                    yield "Hij", (i, j, a, b), self.Hij[i][j][a][b]
        for i in range(n):
            for a, b in product(range(m), repeat=2):
                yield "Hi", (i, a, b), self.Hi[i][a][b]
        for a, b in product(range(m), repeat=2):
            yield "H", (a, b), self.H[a][b]

    def nonzero(self):
        return [(kind, idx, e) for kind, idx, e in self.components() if not is_zero(e)]

    def is_zero(self) -> bool:
        return not self.nonzero()

    def label(self, kind: str, idx) -> str:
        """Upper indices by base name, lower fibre indices numbered from 1."""
        sp_ = self.space
        if kind == "H":
            a, b = idx
            return f"H_{{{a + 1}{b + 1}}}"
        if kind == "Hi":
            i, a, b = idx
            return f"H^{sp_.base[i]}_{{{a + 1}{b + 1}}}"
        i, j, a, b = idx
        return f"H^{{{sp_.base[i]}{sp_.base[j]}}}_{{{a + 1}{b + 1}}}"


def euler_lagrange(lam: LagrangeForm) -> SourceForm:
    """``E_a L = sum_l (-1)^l D_{i1}..D_{il} d^{i1..il}_a L``.

    Summing weighted partials over ordered index tuples equals summing plain
    partials over sorted multi-indices, which is what is done here.
    """
    space, L = lam.space, lam.L
    k = order_of(space, L)
    if 2 * k > space.max_order:
        raise CapacityError(2 * k, space.max_order, "Euler-Lagrange operator")
    out = []
    for alpha in range(space.m):
        acc = sp.Integer(0)
        for l in range(k + 1):
            for index in space.multi_indices(l):
                dL = sp.diff(L, space.coord(alpha, index))
                if dL == 0:
                    continue
                acc += (-1) ** l * total_derivatives(space, dL, index)
        out.append(acc)
    return SourceForm(space, tuple(out))


def total_divergence(J: CurrentDensity) -> sp.Expr:
    return canonical(sum(total_derivative(J.space, c, i) for i, c in enumerate(J.J)))


def _require_second_order(delta: SourceForm) -> None:
    if delta.order > 2:
        raise UnsupportedOrderError(
            f"Helmholtz expressions are implemented for order <= 2 source forms (got {delta.order})"
        )


def helmholtz(delta: SourceForm) -> HelmholtzTensor:
    _require_second_order(delta)
    space, f = delta.space, delta.f
    n, m = space.n, space.m
    D = lambda e, i: total_derivative(space, e, i)
    dp = lambda e, a, *I: weighted_partial(space, e, a, I)

    H = [[None] * m for _ in range(m)]
    Hi = [[[None] * m for _ in range(m)] for _ in range(n)]
    Hij = [[[[None] * m for _ in range(m)] for _ in range(n)] for _ in range(n)]
    for a, b in product(range(m), repeat=2):
        h = dp(f[a], b) - dp(f[b], a)
        for i in range(n):
            h += D(dp(f[b], a, i), i)
            for j in range(n):
                h -= D(D(dp(f[b], a, i, j), j), i)
        H[a][b] = canonical(h)
        for i in range(n):
            hi = dp(f[a], b, i) + dp(f[b], a, i)
            for j in range(n):
                hi -= 2 * D(dp(f[b], a, i, j), j)
            Hi[i][a][b] = canonical(hi)
            for j in range(n):
                Hij[i][j][a][b] = canonical(dp(f[a], b, i, j) - dp(f[b], a, i, j))
    return HelmholtzTensor(space, H, Hi, Hij)


def is_locally_variational(delta: SourceForm) -> tuple[bool, HelmholtzTensor]:
    tensor = helmholtz(delta)
    return tensor.is_zero(), tensor


def helmholtz_dependency_residuals(delta: SourceForm):
    """Residuals of the three identities relating H, H^i and H^{ij}.

    Returns ``(r0[a][b], r1[i][a][b], r2[i][j][a][b])``; all vanish for every
    second-order source form.
    """
    t = helmholtz(delta)
    space = delta.space
    n, m = space.n, space.m
    D = lambda e, i: total_derivative(space, e, i)
    r0 = [[None] * m for _ in range(m)]
    r1 = [[[None] * m for _ in range(m)] for _ in range(n)]
    r2 = [[[[None] * m for _ in range(m)] for _ in range(n)] for _ in range(n)]
    for a, b in product(range(m), repeat=2):
        e = t.H[a][b] + t.H[b][a]
        for i in range(n):
            e -= D(t.Hi[i][a][b], i)
            for j in range(n):
                e += D(D(t.Hij[i][j][a][b], j), i)
        r0[a][b] = canonical(e)
        for i in range(n):
            e = t.Hi[i][a][b] - t.Hi[i][b][a]
            for j in range(n):
                e -= 2 * D(t.Hij[i][j][a][b], j)
            r1[i][a][b] = canonical(e)
            for j in range(n):
                r2[i][j][a][b] = canonical(t.Hij[i][j][a][b] + t.Hij[i][j][b][a])
    return r0, r1, r2


def independent_helmholtz_count(n: int, m: int) -> int:
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return m * (m - 1) // 2 + n * m * (m + 1) // 2 + (n * (n + 1) // 2) * (m * (m - 1) // 2)


def _fibre_degree_terms(space: JetSpace, e):
    """Yield ``(term, degree)`` for each term of ``e`` by total fibre degree."""
    e = canonical(e)
    gens = [s for s, _, _ in space.jet_symbols(e)]
    if not gens:
        if e != 0:
            yield e, 0
        return
    try:
        poly = sp.Poly(e, *gens)
    except sp.PolynomialError as exc:
        raise UnsupportedInputError(
            f"{e} is not polynomial in the fibre coordinates; "
            "use numeric weak-form checking instead"
        ) from exc
    for monom, coeff in poly.terms():
        term = coeff * sp.Mul(*[g**p for g, p in zip(gens, monom)])
        yield term, sum(monom)


def vainberg_tonti(delta: SourceForm) -> LagrangeForm:
    """``L = int_0^1 f_a(x, t u, t Du, t D^2 u) u^a dt`` term by term."""
    _require_second_order(delta)
    space = delta.space
    L = sp.Integer(0)
    for alpha, fa in enumerate(delta.f):
        ua = space.coord(alpha)
        for term, d in _fibre_degree_terms(space, fa):
            L += sp.Rational(1, d + 1) * term * ua
    return LagrangeForm(space, L)


# -- necessary polynomial structure -----------------------------------------

@dataclass
class AndersonDuchampReport:
    passed: bool
    degree_bound: int
    degrees: list
    failures: list = field(default_factory=list)


def _sym_average(values) -> sp.Expr:
    values = list(values)
    return canonical(sp.Add(*values) / len(values))


def anderson_duchamp_check(delta: SourceForm) -> AndersonDuchampReport:
    """Fourth-order/degree-one, third-order/degree-two and degree-<=n conditions."""
    _require_second_order(delta)
    space, f = delta.space, delta.f
    n, m = space.n, space.m
    dp = lambda e, a, I: weighted_partial(space, e, a, I)
    failures = []
    # a term of degree d in the order-2 coordinates has vanishing partials of order > d
    deg2 = []
    for fb in f:
        try:
            deg2.append(degree_in_order(space, fb, 2))
        except UnsupportedInputError:
            deg2.append(None)

    for beta, alpha, gamma in product(range(m), repeat=3):
        if deg2[beta] is not None and deg2[beta] < 2:
            continue
        for quad in space.multi_indices(4):
            vals = []
            for p in set(permutations(quad)):
                vals.append(dp(dp(f[beta], alpha, p[2:]), gamma, p[:2]))
            v = _sym_average(vals)
            if not is_zero(v):
                failures.append({
                    "condition": "fourth-order degree-one",
                    "indices": {"beta": beta, "gamma": gamma, "alpha": alpha, "ijkl": quad},
                    "value": v,
                })

    for beta, alpha, gamma, delta_ in product(range(m), repeat=4):
        if deg2[beta] is not None and deg2[beta] < 3:
            continue
        for rsk in space.multi_indices(3):
            for lij in space.multi_indices(3):
                vals = []
                for p in set(permutations(rsk)):
                    for q in set(permutations(lij)):
                        r, s, k = p
                        l, i, j = q
                        e = dp(f[beta], alpha, (k, l))
                        e = dp(e, gamma, (i, j))
                        e = dp(e, delta_, (r, s))
                        vals.append(e)
                v = _sym_average(vals)
                if not is_zero(v):
                    failures.append({
                        "condition": "third-order degree-two",
                        "indices": {"beta": beta, "delta": delta_, "alpha": alpha,
                                    "gamma": gamma, "rsk": rsk, "lij": lij},
                        "value": v,
                    })

    for beta, d in enumerate(deg2):
        if d is None or d > n:
            failures.append({
                "condition": "degree-bound",
                "indices": {"beta": beta},
                "value": sp.Integer(-1) if d is None else sp.Integer(d),
            })
    return AndersonDuchampReport(not failures, n, deg2, failures)


# -- one-dimensional reconstruction from an energy function -------------------

@dataclass
class ODEReconstruction:
    lagrangian: LagrangeForm
    source: SourceForm
    gauge_term: sp.Expr
    energy_check: bool
    euler_lagrange_check: bool


def reconstruct_lagrangian_ode(E, space: JetSpace) -> ODEReconstruction:
    """Solve ``E = L - u_x dL/du_x`` for polynomial ``E(u, u_x)``.

    ``L`` is determined up to a trivial term ``c(u) u_x``; ``gauge_term``
    reports the choice made (``c = 0``).
    """
    if space.n != 1 or space.m != 1:
        raise JetError("energy reconstruction needs n = m = 1")
    E = canonical(E)
    u, ux, uxx = space.coord(0), space.coord(0, (0,)), space.coord(0, (0, 0))
    if E.free_symbols - {u, ux}:
        raise UnsupportedInputError(f"energy must depend on (u, u_x) only, got {E}")
    try:
        poly = sp.Poly(E, u, ux)
    except sp.PolynomialError as exc:
        raise UnsupportedInputError(f"energy {E} is not polynomial") from exc

    dE = sp.diff(E, ux)
    _, remainder = sp.div(sp.Poly(dE, u, ux), sp.Poly(ux, u, ux))
    if not remainder.is_zero:
        resonant = sum(
            (c * u**a * ux**d for (a, d), c in poly.terms() if d == 1), sp.Integer(0)
        )
        raise ResonanceError(
            f"dE/du_x is not divisible by u_x: the terms {resonant} of degree one in u_x "
            "have no polynomial Lagrangian (formal solution -u_x*log(u_x))"
        )

    L = sp.Integer(0)
    for (a, d), c in poly.terms():
        L += c / (1 - d) * u**a * ux**d
    L = canonical(L)
    f = canonical(sp.diff(E, u) + uxx * sp.cancel(dE / ux))
    lam = LagrangeForm(space, L)
    src = SourceForm(space, (f,))
    energy_ok = bool(is_zero(L - ux * sp.diff(L, ux) - E))
    el_ok = bool(is_zero(euler_lagrange(lam).f[0] - f))
    return ODEReconstruction(lam, src, sp.Integer(0), energy_ok, el_ok)
