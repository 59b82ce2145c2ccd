"""Projectable vector fields, prolongation, Noether decomposition and the Takens checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
import sympy as sp

from .jet import (
    CapacityError,
    JetError,
    JetSpace,
    canonical,
    degree_in_order,
    is_polynomial_in_fibres,
    is_zero,
    order_of,
    to_text,
    total_derivative,
    total_derivatives,
)
from .varcalc import (
    CurrentDensity,
    HelmholtzTensor,
    LagrangeForm,
    SourceForm,
    euler_lagrange,
    helmholtz,
    total_divergence,
    vainberg_tonti,
)

log = logging.getLogger(__name__)


class SpanError(JetError):
    def __init__(self, rank: int, needed: int, point):
        super().__init__(
            f"fields span only rank {rank} of {needed} at point {tuple(point)}"
        )
        self.rank = rank
        self.needed = needed


class NoCurrentError(JetError):
    """Q.f is not a total divergence."""


class InternalConsistencyError(RuntimeError):
    """Two independent derivations of the same quantity disagree."""


@dataclass(frozen=True)
class ProjectableVectorField:
    """``V = V^i(x) d/dx^i + V^alpha(x, u) d/du^alpha``."""

    space: JetSpace
    base: tuple
    fiber: tuple
    name: str = ""

    def __post_init__(self):
        base = tuple(canonical(c) for c in self.base)
        fib = tuple(canonical(c) for c in self.fiber)
        sp_ = self.space
        if len(base) != sp_.n or len(fib) != sp_.m:
            raise JetError(f"vector field needs {sp_.n} base and {sp_.m} fibre coefficients")
        for c in base:
            if sp_.jet_symbols(c):
                raise JetError(f"base coefficient {c} depends on fibre coordinates; not projectable")
        for c in fib:
            if order_of(sp_, c) > 0:
                raise JetError(f"fibre coefficient {c} depends on derivatives")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fiber", fib)

    @property
    def components(self) -> tuple:
        return self.base + self.fiber

    def apply(self, g) -> sp.Expr:
        """``V(g)`` for a function ``g(x, u)`` on E."""
        sp_ = self.space
        out = sum((c * sp.diff(g, x) for c, x in zip(self.base, sp_.x)), sp.Integer(0))
        out += sum((c * sp.diff(g, sp_.coord(a)) for a, c in enumerate(self.fiber)), sp.Integer(0))
        return canonical(out)

    def bracket(self, other: "ProjectableVectorField") -> "ProjectableVectorField":
        comps = [self.apply(w) - other.apply(v) for v, w in zip(self.components, other.components)]
        n = self.space.n
        return ProjectableVectorField(self.space, comps[:n], comps[n:],
                                      f"[{self.name},{other.name}]")

    def describe(self) -> str:
        sp_ = self.space
        parts = []
        for c, name in zip(self.components, sp_.base + sp_.fiber):
            if c != 0:
                parts.append(f"({to_text(c, sp_)})*d/d{name}")
        return " + ".join(parts) if parts else "0"


def characteristic(V: ProjectableVectorField) -> tuple:
    """``V_ch^alpha = V^alpha - u^alpha_i V^i``."""
    sp_ = V.space
    return tuple(
        canonical(V.fiber[a] - sum(sp_.coord(a, (i,)) * V.base[i] for i in range(sp_.n)))
        for a in range(sp_.m)
    )


@dataclass
class ProlongedVectorField:
    field: ProjectableVectorField
    order: int
    xi: dict  # (alpha, sorted index) -> coefficient, 1 <= |index| <= order

    def coefficients(self) -> dict:
        """Coefficient of every coordinate vector field on ``J^order E``."""
        sp_ = self.field.space
        out = {x: c for x, c in zip(sp_.x, self.field.base)}
        out.update({sp_.coord(a): c for a, c in enumerate(self.field.fiber)})
        out.update({sp_.coord(a, I): c for (a, I), c in self.xi.items()})
        return out

    def apply(self, g) -> sp.Expr:
        """``(j^k V)(g)``; summing over sorted indices absorbs the weights."""
        sp_ = self.field.space
        g = sp.sympify(g)
        if order_of(sp_, g) > self.order:
            raise JetError(f"prolongation of order {self.order} applied to order {order_of(sp_, g)}")
        out = sp.Integer(0)
        for sym, c in self.coefficients().items():
            if c != 0:
                out += c * sp.diff(g, sym)
        return canonical(out)


def prolong(V: ProjectableVectorField, k: int) -> ProlongedVectorField:
    """Recursive xi-coefficients:

    ``xi_{I,i} = D_i xi_I - u_{I+j} D_i V^j`` with ``xi_{} = V^alpha``.
    """
    sp_ = V.space
    if k > sp_.max_order:
        raise CapacityError(k, sp_.max_order, "prolongation")
    DV = [[total_derivative(sp_, V.base[j], i) for j in range(sp_.n)] for i in range(sp_.n)]
    xi: dict = {}
    for alpha in range(sp_.m):
        prev = {(): V.fiber[alpha]}
        for l in range(1, k + 1):
            cur = {}
            for index in sp_.multi_indices(l):
                head, i = index[:-1], index[-1]
                e = total_derivative(sp_, prev[head], i)
                for j in range(sp_.n):
                    if DV[i][j] != 0:
                        e -= sp_.coord(alpha, head + (j,)) * DV[i][j]
                cur[index] = canonical(e)
                xi[(alpha, index)] = cur[index]
            prev = cur
    return ProlongedVectorField(V, k, xi)


def prolong_characteristic(V: ProjectableVectorField, k: int) -> ProlongedVectorField:
    """Prolongation via ``tot V + j V_ch``: ``xi_I = D_I V_ch + V^i u_{I+i}``."""
    sp_ = V.space
    ch = characteristic(V)
    xi = {}
    for alpha in range(sp_.m):
        for l in range(1, k + 1):
            for index in sp_.multi_indices(l):
                e = total_derivatives(sp_, ch[alpha], index)
                e += sum((V.base[i] * sp_.coord(alpha, index + (i,)) for i in range(sp_.n)),
                         sp.Integer(0))
                xi[(alpha, index)] = canonical(e)
    return ProlongedVectorField(V, k, xi)


def prolonged_bracket(P: ProlongedVectorField, Q: ProlongedVectorField) -> dict:
    """Coefficients of ``[P, Q]`` on ``J^k E``."""
    cp, cq = P.coefficients(), Q.coefficients()
    return {s: canonical(P.apply(cq[s]) - Q.apply(cp[s])) for s in cp}


def lie_derivative_source(V: ProjectableVectorField, delta: SourceForm) -> SourceForm:
    """Coefficients ``(j^2 V)(f_a) + f_b d_a V^b + f_a d_i V^i`` of ``L_{j^2 V} Delta``."""
    sp_ = delta.space
    jv = prolong(V, max(delta.order, 1))
    div = sum((sp.diff(V.base[i], sp_.x[i]) for i in range(sp_.n)), sp.Integer(0))
    out = []
    for a in range(sp_.m):
        e = jv.apply(delta.f[a]) + delta.f[a] * div
        for b in range(sp_.m):
            e += delta.f[b] * sp.diff(V.fiber[b], sp_.coord(a))
        out.append(e)
    return SourceForm(sp_, tuple(out))


def is_symmetry(V: ProjectableVectorField, delta: SourceForm) -> bool:
    return lie_derivative_source(V, delta).is_zero()


def continuity_residual(V: ProjectableVectorField, delta: SourceForm) -> SourceForm:
    """``E_a(V_ch^b f_b)``; zero iff a local continuity equation with characteristic V_ch exists."""
    ch = characteristic(V)
    g = sum((c * f for c, f in zip(ch, delta.f)), sp.Integer(0))
    return euler_lagrange(LagrangeForm(delta.space, g))


def ecs_residual(V: ProjectableVectorField, delta: SourceForm,
                 tensor: HelmholtzTensor | None = None) -> SourceForm:
    """``V_ch^b H_ab + (D_i V_ch^b) H^i_ab + (D_j D_i V_ch^b) H^{ji}_ab``."""
    sp_ = delta.space
    t = helmholtz(delta) if tensor is None else tensor
    n, m = sp_.n, sp_.m
    ch = characteristic(V)
    Dch = [[total_derivative(sp_, ch[b], i) for b in range(m)] for i in range(n)]
    out = []
    for a in range(m):
        e = sp.Integer(0)
        for b in range(m):
            e += ch[b] * t.H[a][b]
            for i in range(n):
                e += Dch[i][b] * t.Hi[i][a][b]
                for j in range(n):
                    if t.Hij[j][i][a][b] != 0:
                        e += total_derivative(sp_, Dch[i][b], j) * t.Hij[j][i][a][b]
        out.append(e)
    return SourceForm(sp_, tuple(out))


def noether_decomposition(V: ProjectableVectorField, delta: SourceForm,
                          tensor: HelmholtzTensor | None = None) -> tuple[SourceForm, SourceForm]:
    """``(E_a(V_ch^b f_b), ECS_a)``; their sum is the Lie derivative of ``delta``."""
    return continuity_residual(V, delta), ecs_residual(V, delta, tensor)


def verify_noether_identity(V: ProjectableVectorField, delta: SourceForm,
                            tensor: HelmholtzTensor | None = None) -> bool:
    lie = lie_derivative_source(V, delta)
    el, ecs = noether_decomposition(V, delta, tensor)
    ok = all(is_zero(l - a - b) for l, a, b in zip(lie.f, el.f, ecs.f))
    if not ok:
        raise InternalConsistencyError(
            f"Lie derivative of the source form along {V.name or V.describe()} disagrees "
            "with the Euler-Lagrange + ECS decomposition"
        )
    return ok


def check_current(Q: Sequence, delta: SourceForm, J: CurrentDensity) -> bool:
    """``D_i J^i == Q^a f_a`` identically."""
    g = sum((q * f for q, f in zip(Q, delta.f)), sp.Integer(0))
    return bool(is_zero(total_divergence(J) - g))


def construct_current_ode(Q: Sequence, delta: SourceForm) -> CurrentDensity:
    """For ``n = 1``, find ``J`` with ``D_x J = Q^a f_a`` by peeling off top orders.

    At each order ``r`` the remainder is affine in ``u^a_r`` with coefficients
    ``A_a``; ``P = int_0^1 A_a(t u_{r-1}) u^a_{r-1} dt`` removes that layer.
    The final pure-x remainder is integrated in ``x``.
    """
    sp_ = delta.space
    if sp_.n != 1:
        raise JetError("current construction is only implemented for n = 1")
    g = canonical(sum((q * f for q, f in zip(Q, delta.f)), sp.Integer(0)))
    if not euler_lagrange(LagrangeForm(sp_, g)).is_zero():
        raise NoCurrentError(f"{to_text(g, sp_)} is not a total derivative (Euler-Lagrange residual != 0)")
    if not is_polynomial_in_fibres(sp_, g):
        raise NoCurrentError("current construction needs polynomial fibre dependence")
    x = sp_.x[0]
    t = sp.Dummy("t")
    J = sp.Integer(0)
    rem = g
    for r in range(order_of(sp_, g), 0, -1):
        top = [sp_.coord(a, (0,) * r) for a in range(sp_.m)]
        lower = [sp_.coord(a, (0,) * (r - 1)) for a in range(sp_.m)]
        A = [sp.diff(rem, s) for s in top]
        if any(sp.diff(c, s) != 0 for c in A for s in top):
            raise NoCurrentError(f"remainder is not affine in order-{r} coordinates")
        scaled = {s: t * s for s in lower}
        P = sp.Integer(0)
        for a in range(sp_.m):
            integrand = sp.expand(A[a].xreplace(scaled) * lower[a])
            P += sp.integrate(integrand, (t, 0, 1))
        P = canonical(P)
        J += P
        rem = canonical(rem - total_derivative(sp_, P, 0))
    if sp_.jet_symbols(rem):
        raise NoCurrentError(f"leftover {to_text(rem, sp_)} depends on fibre coordinates")
    J = canonical(J + sp.integrate(rem, x))
    current = CurrentDensity(sp_, (J,))
    if not check_current(Q, delta, current):
        raise NoCurrentError("constructed current failed verification")
    return current


# -- span condition and transformed ECS -------------------------------------

def _numeric_zero(e, digits: int = 50) -> bool:
    e = sp.sympify(e)
    if e == 0:
        return True
    return abs(sp.N(e, digits)) < sp.Float(10) ** (-(digits - 10))


def point_substitution(space: JetSpace, point: Sequence) -> dict:
    if len(point) != space.n + space.m:
        raise JetError(f"a point of E needs {space.n + space.m} coordinates, got {len(point)}")
    subs = {x: sp.sympify(v) for x, v in zip(space.x, point[: space.n])}
    subs.update({space.coord(a): sp.sympify(v) for a, v in enumerate(point[space.n:])})
    return subs


@dataclass
class SpanSelection:
    subset: list  # indices into the field list, declaration order
    B: sp.Matrix
    C: sp.Matrix
    rank: int
    inverse_verified: bool


def span_matrix(fields: Sequence[ProjectableVectorField], point: Sequence) -> SpanSelection:
    """Greedy pivoted choice of ``n + m`` fields spanning ``T_p E`` and the inverse of their matrix."""
    if not fields:
        raise JetError("no vector fields given")
    space = fields[0].space
    N = space.n + space.m
    subs = point_substitution(space, point)
    rows = [sp.Matrix([[sp.sympify(c).xreplace(subs) for c in V.components]]) for V in fields]
    chosen: list[int] = []
    rank = 0
    for k, row in enumerate(rows):
        trial = sp.Matrix.vstack(*[rows[c] for c in chosen], row)
        r = trial.rank(iszerofunc=_numeric_zero)
        if r > rank:
            chosen.append(k)
            rank = r
        if rank == N:
            break
    if rank < N:
        raise SpanError(rank, N, point)
    B = sp.Matrix.vstack(*[rows[c] for c in chosen])
    C = B.inv()
    if not all(e.is_Rational for e in B):
        C = C.applyfunc(sp.simplify)
    residual = (C * B - sp.eye(N)).applyfunc(sp.simplify)
    verified = all(_numeric_zero(e) for e in residual)
    return SpanSelection(chosen, B, C, rank, verified)


def transformed_ecs(fields: Sequence[ProjectableVectorField], delta: SourceForm, C: sp.Matrix,
                    point: Sequence | None = None, tensor: HelmholtzTensor | None = None):
    """Combine the ECS of ``n + m`` spanning fields with the rows of ``C``.

    Returns ``(eq1, eq2)`` with ``eq1[(j, a)]`` (``H_ab`` eliminated) and
    ``eq2[(a, c)] = H_ac + ...``.  With ``point`` given, ``(x, u)`` are fixed
    at that point and the higher jet coordinates stay free.
    """
    space = delta.space
    n, m = space.n, space.m
    if len(fields) != n + m:
        raise JetError(f"transformed ECS needs exactly {n + m} fields")
    t = helmholtz(delta) if tensor is None else tensor
    subs = point_substitution(space, point) if point is not None else {}
    ecs = [[canonical(e.xreplace(subs)) for e in ecs_residual(V, delta, t).f] for V in fields]
    eq2 = {}
    for a, c in product(range(m), repeat=2):
        eq2[(a, c)] = canonical(sum((C[n + c, A] * ecs[A][a] for A in range(n + m)), sp.Integer(0)))
    eq1 = {}
    for j, a in product(range(n), range(m)):
        e = sum((C[j, A] * ecs[A][a] for A in range(n + m)), sp.Integer(0))
        e += sum((space.coord(c, (j,)) * eq2[(a, c)] for c in range(m)), sp.Integer(0))
        eq1[(j, a)] = canonical(e)
    return eq1, eq2


def default_sample_points(space: JetSpace, count: int = 5, seed: int = 0) -> list[tuple]:
    """Pseudo-random rational points of E in [-2, 2]^(n+m)."""
    rng = np.random.default_rng(seed)
    return [
        tuple(sp.Rational(int(v), 1000) for v in rng.integers(-2000, 2001, size=space.n + space.m))
        for _ in range(count)
    ]


# -- orchestrated report ------------------------------------------------------

@dataclass
class TakensReport:
    equation: list
    fields: list = field(default_factory=list)
    span: list = field(default_factory=list)
    helmholtz: list = field(default_factory=list)
    transformed_ecs: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    variational: bool = False
    lagrangian: str | None = None
    lagrangian_verified: bool | None = None
    probabilistic: bool = False
    trace: list | None = None
    notes: list = field(default_factory=list)

    @property
    def hypotheses_hold(self) -> bool:
        return all(self.hypotheses.values())

    @property
    def all_pass(self) -> bool:
        return self.hypotheses_hold and self.variational and self.lagrangian_verified is not False

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "fields": self.fields,
            "span": self.span,
            "helmholtz": self.helmholtz,
            "transformed_ecs": self.transformed_ecs,
            "hypotheses": self.hypotheses,
            "variational": self.variational,
            "lagrangian": self.lagrangian,
            "lagrangian_verified": self.lagrangian_verified,
            "probabilistic": self.probabilistic,
            "trace": self.trace,
            "notes": self.notes,
        }


def _texts(space, exprs) -> list[str]:
    return [to_text(e, space) for e in exprs]


def helmholtz_stages(t: HelmholtzTensor) -> list[dict]:
    stages = {"Hij": [], "Hi": [], "H": []}
    for kind, idx, e in t.components():
        if not is_zero(e):
            stages[kind].append({"component": t.label(kind, idx), "value": to_text(e, t.space)})
    names = {"Hij": "H^{ij}", "Hi": "H^i", "H": "H"}
    return [{"stage": names[k], "zero": not v, "nonzero": v} for k, v in stages.items()]


def _trace(t: HelmholtzTensor) -> list[dict]:
    space = t.space
    n, m = space.n, space.m
    hij = [t.Hij[i][j][a][b] for i in range(n) for j in range(n) for a in range(m) for b in range(m)]
    hi = [t.Hi[i][a][b] for i in range(n) for a in range(m) for b in range(m)]
    h = [t.H[a][b] for a in range(m) for b in range(m)]
    hi_order = max((order_of(space, e) for e in hi), default=0)
    return [
        {"step": "H^{ij} = 0", "holds": all(is_zero(e) for e in hij),
         "max_order": max((order_of(space, e) for e in hij), default=0)},
        {"step": "H^i = O(2)", "holds": hi_order <= 2, "max_order": hi_order,
         "degree_in_order_3": max((degree_in_order(space, e, 3) for e in hi), default=0)},
        {"step": "H^i = 0", "holds": all(is_zero(e) for e in hi)},
        {"step": "H = 0", "holds": all(is_zero(e) for e in h),
         "max_order": max((order_of(space, e) for e in h), default=0)},
    ]


def takens_report(delta: SourceForm, fields: Sequence[ProjectableVectorField],
                  sample_points: Sequence[Sequence], trace: bool = False) -> TakensReport:
    """Check symmetry, continuity and span hypotheses and compute the Helmholtz verdict.

    The verdict comes from the Helmholtz tensor itself; the hypotheses are
    reported alongside, not used to infer it.
    """
    space = delta.space
    report = TakensReport(equation=_texts(space, delta.f))
    t = helmholtz(delta)
    probabilistic = False

    sym_ok = cont_ok = True
    for k, V in enumerate(fields):
        name = V.name or f"V{k + 1}"
        lie = lie_derivative_source(V, delta)
        el, ecs = noether_decomposition(V, delta, t)
        verify_noether_identity(V, delta, t)
        sym = [is_zero(e) for e in lie.f]
        cont = [is_zero(e) for e in el.f]
        probabilistic |= any(z.probabilistic for z in sym + cont)
        is_sym, is_cont = all(sym), all(cont)
        sym_ok &= is_sym
        cont_ok &= is_cont
        report.fields.append({
            "name": name,
            "field": V.describe(),
            "characteristic": _texts(space, characteristic(V)),
            "symmetry": is_sym,
            "lie_derivative": _texts(space, lie.f),
            "continuity": is_cont,
            "continuity_residual": _texts(space, el.f),
            "ecs_residual": _texts(space, ecs.f),
        })

    span_ok = bool(sample_points)
    for p in sample_points:
        entry = {"point": [sp.sstr(v) for v in p]}
        try:
            sel = span_matrix(fields, p)
        except SpanError as exc:
            span_ok = False
            entry.update(ok=False, rank=exc.rank, subset=[], inverse_verified=False)
            report.span.append(entry)
            continue
        entry.update(ok=sel.inverse_verified, rank=sel.rank,
                     subset=[fields[c].name or f"V{c + 1}" for c in sel.subset],
                     inverse_verified=sel.inverse_verified)
        span_ok &= sel.inverse_verified
        report.span.append(entry)
        eq1, eq2 = transformed_ecs([fields[c] for c in sel.subset], delta, sel.C, p, t)
        nz1 = {f"I[{space.base[j]},{space.fiber[a]}]": to_text(e, space)
               for (j, a), e in eq1.items() if not is_zero(e)}
        nz2 = {f"II[{space.fiber[a]},{space.fiber[c]}]": to_text(e, space)
               for (a, c), e in eq2.items() if not is_zero(e)}
        report.transformed_ecs.append({
            "point": entry["point"], "zero": not nz1 and not nz2, "nonzero": {**nz1, **nz2},
        })
    if not sample_points:
        report.notes.append("no sample points: span condition not checked")
    else:
        report.notes.append("span condition verified at the listed sample points only")

    report.hypotheses = {"symmetry": sym_ok, "continuity": cont_ok, "span": span_ok}
    report.helmholtz = helmholtz_stages(t)
    report.variational = t.is_zero()
    if trace:
        report.trace = _trace(t)

    if report.variational:
        if all(is_polynomial_in_fibres(space, f) for f in delta.f):
            lam = vainberg_tonti(delta)
            report.lagrangian = to_text(lam.L, space)
            check = [is_zero(a - b) for a, b in zip(euler_lagrange(lam).f, delta.f)]
            probabilistic |= any(z.probabilistic for z in check)
            report.lagrangian_verified = all(check)
        else:
            report.notes.append("non-polynomial fibre dependence: no Vainberg-Tonti Lagrangian attached")
    report.probabilistic = probabilistic
    if probabilistic:
        report.notes.append("some zero tests used randomized evaluation")
    return report
