import random

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from varkit.jet import JetSpace, canonical, is_zero, total_derivative
from varkit.symmetry import (NoCurrentError, ProjectableVectorField, SpanError, characteristic,
                             check_current, construct_current_ode, continuity_residual,
                             default_sample_points, ecs_residual, is_symmetry,
                             lie_derivative_source, noether_decomposition, prolong,
                             prolong_characteristic, prolonged_bracket, span_matrix,
                             takens_report, transformed_ecs, verify_noether_identity)
from varkit.varcalc import CurrentDensity, LagrangeForm, SourceForm, euler_lagrange

from instances import cases, lagrangian, source, space, vector_field

S1 = JetSpace(("x",), ("u",))
x, = S1.x
u, ux, uxx = S1.u(0), S1.u(0, 0), S1.u(0, 0, 0)
half = sp.Rational(1, 2)
OSC = SourceForm(S1, (u + uxx,))
TRANSPORT = SourceForm(S1, (ux,))


def field(base, fib, name=""):
    return ProjectableVectorField(S1, (sp.sympify(base),), (sp.sympify(fib),), name)


DX, DU = field(1, 0, "T"), field(0, 1, "U")
SIN, COS = field(0, sp.sin(x), "S"), field(0, sp.cos(x), "C")


def test_characteristic_examples():
    assert characteristic(DX) == (-ux,)
    assert characteristic(SIN) == (sp.sin(x),)
    assert characteristic(field(0, u)) == (u,)


def test_projectability_is_enforced():
    with pytest.raises(ValueError):
        field(u, 0)
    with pytest.raises(ValueError):
        field(0, ux)


def test_prolongation_examples():
    assert all(c == 0 for c in prolong(DX, 2).xi.values())
    p = prolong(field(0, x), 2).xi
    assert (p[(0, (0,))], p[(0, (0, 0))]) == (1, 0)
    p = prolong(field(0, u), 2).xi
    assert (p[(0, (0,))], p[(0, (0, 0))]) == (ux, uxx)
    assert prolong(SIN, 2).xi[(0, (0, 0))] == -sp.sin(x)


SHAPES = st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)])


@given(st.integers(0, 10**6), SHAPES, st.integers(1, 3))
def test_prolongation_routes_agree(seed, shape, k):
    sp_ = space(*shape)
    V = vector_field(random.Random(seed), sp_)
    a, b = prolong(V, k).xi, prolong_characteristic(V, k).xi
    assert a.keys() == b.keys()
    assert all(canonical(a[key] - b[key]) == 0 for key in a)


@given(st.integers(0, 10**6), SHAPES)
def test_prolongation_respects_bracket(seed, shape):
    sp_ = space(*shape)
    rng = random.Random(seed)
    V, W = vector_field(rng, sp_), vector_field(rng, sp_)
    lhs = prolonged_bracket(prolong(V, 2), prolong(W, 2))
    rhs = prolong(V.bracket(W), 2).coefficients()
    assert lhs.keys() == rhs.keys()
    assert all(canonical(lhs[s] - rhs[s]) == 0 for s in rhs)


def test_lie_derivative_examples():
    assert lie_derivative_source(DX, OSC).is_zero()
    assert lie_derivative_source(DU, SourceForm(S1, (u,))).f == (1,)
    assert lie_derivative_source(SIN, OSC).is_zero()


def test_symmetry_verdicts():
    assert is_symmetry(DX, OSC)
    assert not is_symmetry(DU, OSC)
    assert is_symmetry(COS, OSC)


def test_decomposition_examples():
    el, ecs = noether_decomposition(DX, TRANSPORT)
    assert el.f == (2 * uxx,) and ecs.f == (-2 * uxx,)
    assert lie_derivative_source(DX, TRANSPORT).is_zero()
    el, ecs = noether_decomposition(DX, OSC)
    assert el.is_zero() and ecs.is_zero()
    zero = SourceForm(S1, (sp.Integer(0),))
    el, ecs = noether_decomposition(SIN, zero)
    assert el.is_zero() and ecs.is_zero()


def test_continuity_examples():
    assert continuity_residual(DX, OSC).is_zero()
    assert continuity_residual(DX, TRANSPORT).f == (2 * uxx,)
    assert continuity_residual(SIN, OSC).is_zero()


def test_ecs_examples():
    assert ecs_residual(DX, OSC).is_zero()
    assert ecs_residual(DX, TRANSPORT).f == (-2 * uxx,)
    assert ecs_residual(SIN, OSC).is_zero()


@given(st.integers(0, 10**6), SHAPES)
def test_lie_derivative_decomposes(seed, shape):
    sp_ = space(*shape)
    rng = random.Random(seed)
    V = vector_field(rng, sp_)
    delta = SourceForm(sp_, source(rng, sp_, terms=3))
    lie = lie_derivative_source(V, delta)
    el, ecs = noether_decomposition(V, delta)
    assert all(canonical(l - a - b) == 0 for l, a, b in zip(lie.f, el.f, ecs.f))
    assert verify_noether_identity(V, delta)


@given(st.integers(0, 10**6), SHAPES)
def test_variational_sources_have_no_ecs(seed, shape):
    sp_ = space(*shape)
    rng = random.Random(seed)
    delta = euler_lagrange(LagrangeForm(sp_, lagrangian(rng, sp_, order=1, terms=3)))
    assert ecs_residual(vector_field(rng, sp_), delta).is_zero()


@pytest.mark.parametrize("V", [DX, SIN, COS])
def test_symmetry_makes_ecs_minus_continuity(V):
    assert is_symmetry(V, OSC)
    el, ecs = noether_decomposition(V, OSC)
    assert all(is_zero(a + b) for a, b in zip(el.f, ecs.f))


def test_ecs_is_minus_continuity_for_symmetry_of_nonvariational_source():
    assert is_symmetry(DX, TRANSPORT)
    el, ecs = noether_decomposition(DX, TRANSPORT)
    assert canonical(el.f[0] + ecs.f[0]) == 0


def test_check_current_examples():
    J = CurrentDensity(S1, (half * (ux**2 + u**2),))
    assert check_current((ux,), OSC, J)
    assert not check_current((ux,), OSC, CurrentDensity(S1, (u**2,)))
    assert check_current((0,), OSC, CurrentDensity(S1, (sp.Integer(5),)))


def test_construct_current_examples():
    assert construct_current_ode((ux,), OSC).J == (canonical(half * (u**2 + ux**2)),)
    assert construct_current_ode((ux,), SourceForm(S1, (uxx,))).J == (half * ux**2,)
    assert construct_current_ode((0,), OSC).J == (0,)
    with pytest.raises(NoCurrentError):
        construct_current_ode((ux,), TRANSPORT.__class__(S1, (ux + uxx * u,)))


@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
def test_constructed_current_recovers_divergence(seed, m):
    sp_ = space(1, m)
    rng = random.Random(seed)
    J = lagrangian(rng, sp_, order=1, terms=3, degree=3)
    g = total_derivative(sp_, J, 0)
    # as Q . f with Q = (1, 0, ...)
    delta = SourceForm(sp_, (g,) + (sp.Integer(0),) * (m - 1))
    Q = (1,) + (0,) * (m - 1)
    found = construct_current_ode(Q, delta).J[0]
    diff = canonical(found - J)
    assert not sp_.jet_symbols(diff) and not diff.free_symbols


def test_span_examples():
    sel = span_matrix([DX, DU], (sp.Rational(3, 10), 1))
    assert sel.B == sp.eye(2) and sel.C == sp.eye(2) and sel.subset == [0, 1]
    sel = span_matrix([DX, SIN, COS], (sp.pi / 2, 0))
    assert sel.subset == [0, 1] and sel.B == sp.eye(2)
    with pytest.raises(SpanError) as exc:
        span_matrix([DX, field(x, 0)], (1, 0))
    assert exc.value.rank == 1


@given(st.integers(0, 10**6), SHAPES)
def test_span_inverse(seed, shape):
    sp_ = space(*shape)
    rng = random.Random(seed)
    fields = [vector_field(rng, sp_) for _ in range(sp_.n + sp_.m + 1)]
    p = default_sample_points(sp_, 1, seed)[0]
    try:
        sel = span_matrix(fields, p)
    except SpanError:
        return
    assert sel.C * sel.B == sp.eye(sp_.n + sp_.m)
    assert sel.inverse_verified


def test_transformed_ecs_examples():
    for p in [(sp.Rational(3, 10), 0), (sp.pi / 2, 0), (2, 0)]:
        sel = span_matrix([DX, SIN, COS], p)
        eq1, eq2 = transformed_ecs([[DX, SIN, COS][c] for c in sel.subset], OSC, sel.C, p)
        assert all(e == 0 for e in eq1.values()) and all(e == 0 for e in eq2.values())
    sel = span_matrix([DX, DU], (0, 0))
    eq1, eq2 = transformed_ecs([DX, DU], TRANSPORT, sel.C, (0, 0))
    assert eq1[(0, 0)] == -2 * uxx
    assert eq2[(0, 0)] == 0


def test_takens_oscillator():
    rep = takens_report(OSC, [DX, SIN, COS], [(sp.Rational(3, 10), 0), (sp.pi / 2, 0), (2, 0)],
                        trace=True)
    assert rep.hypotheses == {"symmetry": True, "continuity": True, "span": True}
    assert rep.variational and rep.lagrangian_verified and rep.all_pass
    assert rep.lagrangian == "u*u_xx/2 + u**2/2"
    assert all(t["holds"] for t in rep.trace)
    assert all(e["zero"] for e in rep.transformed_ecs)


def test_takens_transport():
    rep = takens_report(TRANSPORT, [DX, DU], default_sample_points(S1))
    assert not rep.hypotheses["continuity"] and not rep.variational
    assert not rep.fields[0]["continuity"]
    hi = next(s for s in rep.helmholtz if s["stage"] == "H^i")
    assert hi["nonzero"] == [{"component": "H^x_{11}", "value": "2"}]
    assert rep.lagrangian is None


def test_takens_zero_source():
    rep = takens_report(SourceForm(S1, (sp.Integer(0),)), [DX, DU], [(0, 0)])
    assert rep.variational and rep.lagrangian == "0" and rep.lagrangian_verified
