"""Numerical cross-checks of symbolic verdicts: quadrature and finite-difference first variation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy as sp
from scipy.integrate import simpson

from .jet import JetError, SectionPolynomial, pullback, randomized_zero
from .varcalc import LagrangeForm, SourceForm

PASS_RTOL = 1e-6
DEGENERATE = 1e-12
DEFAULT_EPS = 1e-4


@dataclass(frozen=True)
class GridSpec:
    bounds: tuple  # ((a, b), ...) per axis
    nodes: tuple
    rule: str = "simpson"

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        nodes = self.nodes if isinstance(self.nodes, tuple) else (self.nodes,) * len(bounds)
        if not 1 <= len(bounds) <= 2:
            raise JetError("numeric checks support 1-D and 2-D domains only")
        if len(nodes) != len(bounds) or any(k < 32 for k in nodes):
            raise JetError("need at least 32 nodes per axis")
        if not all(np.isfinite(v) for ab in bounds for v in ab) or any(a >= b for a, b in bounds):
            raise JetError(f"bad domain bounds {bounds}")
        if self.rule != "simpson":
            raise JetError(f"unknown quadrature rule {self.rule!r}")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "nodes", tuple(int(k) for k in nodes))

    @classmethod
    def default(cls, bounds) -> "GridSpec":
        """1024 Simpson panels in 1-D, 128 per axis in 2-D (odd node counts)."""
        bounds = tuple(bounds)
        return cls(bounds, 1025 if len(bounds) == 1 else 129)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, k) for (a, b), k in zip(self.bounds, self.nodes)]


def _simpson_nd(values: np.ndarray, axes: list[np.ndarray]) -> float:
    for ax in reversed(axes):
        values = simpson(values, x=ax, axis=-1)
    return float(values)


def integrate_with_error(expr, xs: Sequence[sp.Symbol], grid: GridSpec) -> tuple[float, float]:
    """Composite Simpson quadrature and an error estimate from the half-resolution grid."""
    if len(xs) != len(grid.bounds):
        raise JetError(f"domain has {len(grid.bounds)} axes, expression lives on {len(xs)}")
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    values = np.broadcast_to(sp.lambdify(list(xs), sp.sympify(expr), "numpy")(*mesh),
                             mesh[0].shape).astype(float)
    fine = _simpson_nd(values, axes)
    coarse = _simpson_nd(values[(slice(None, None, 2),) * len(axes)], [a[::2] for a in axes])
    # Simpson error is O(h^4): halving h cuts it by ~16
    return fine, abs(fine - coarse) / 15.0


def integrate(expr, xs: Sequence[sp.Symbol], grid: GridSpec) -> float:
    return integrate_with_error(expr, xs, grid)[0]


def functional_value(lam: LagrangeForm, s: SectionPolynomial, grid: GridSpec) -> float:
    return integrate(pullback(lam.space, lam.L, s), lam.space.x, grid)


@dataclass(frozen=True)
class TestFunction:
    """Polynomial perturbation that vanishes with its first derivatives on the boundary."""

    __test__ = False  # not a pytest class

    components: tuple

    def vanishes_on(self, xs: Sequence[sp.Symbol], grid: GridSpec) -> bool:
        for phi in self.components:
            phi = sp.sympify(phi)
            for x, (a, b) in zip(xs, grid.bounds):
                for c in (a, b):
                    c = sp.nsimplify(c)
                    if sp.expand(phi.subs(x, c)) != 0 or sp.expand(sp.diff(phi, x).subs(x, c)) != 0:
                        return False
        return True


@dataclass
class WeakFormResult:
    first_variation: float
    weak_form: float
    residual: float
    relative: float
    passed: bool
    inconclusive: bool
    quadrature_error: float = 0.0


def _shift(s: SectionPolynomial, phi: TestFunction, eps) -> SectionPolynomial:
    return SectionPolynomial(s.space, tuple(c + eps * p for c, p in zip(s.components, phi.components)))


def weak_form_check(delta: SourceForm, lam: LagrangeForm, s: SectionPolynomial,
                    phi: TestFunction, grid: GridSpec, eps: float = DEFAULT_EPS) -> WeakFormResult:
    """Compare ``(I(s+eps phi) - I(s-eps phi)) / 2 eps`` with ``int f(s) phi``.

    The difference quotient is formed exactly before quadrature, so only the
    O(eps^2) truncation of the central difference remains.
    """
    space = delta.space
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    if len(phi.components) != space.m:
        raise JetError(f"test function needs {space.m} components")
    if not phi.vanishes_on(space.x, grid):
        raise JetError("test function must vanish with its first derivatives on the boundary")
    e = sp.nsimplify(eps, rational=True)
    plus = pullback(space, lam.L, _shift(s, phi, e))
    minus = pullback(space, lam.L, _shift(s, phi, -e))
    quotient = sp.expand((plus - minus) / (2 * e))
    fd, fd_err = integrate_with_error(quotient, space.x, grid)
    weak_integrand = sum((pullback(space, f, s) * p for f, p in zip(delta.f, phi.components)),
                         sp.Integer(0))
    weak, weak_err = integrate_with_error(weak_integrand, space.x, grid)
    quad_err = fd_err + weak_err
    residual = abs(fd - weak)
    scale = max(abs(fd), abs(weak))
    # both terms indistinguishable from zero: no meaningful relative residual
    if scale < max(DEGENERATE, 2 * quad_err):
        return WeakFormResult(fd, weak, residual, 0.0, residual <= max(DEGENERATE, 2 * quad_err),
                              True, quad_err)
    relative = residual / scale
    return WeakFormResult(fd, weak, residual, relative, relative <= PASS_RTOL + eps**2, False,
                          quad_err)


def weak_form_scaling(delta, lam, s, phi, grid,
                      eps: float = DEFAULT_EPS) -> tuple[WeakFormResult, WeakFormResult, bool]:
    """Run at ``eps`` and ``eps/2``.

    The residual is consistent with O(eps^2) when halving the step cuts it by
    about four, or when it already sits at the quadrature noise floor.
    """
    r1 = weak_form_check(delta, lam, s, phi, grid, eps)
    r2 = weak_form_check(delta, lam, s, phi, grid, eps / 2)
    if r1.inconclusive or r2.inconclusive:
        return r1, r2, r1.passed and r2.passed
    scale = max(abs(r2.first_variation), abs(r2.weak_form))
    floor = 2 * r2.quadrature_error / scale + DEGENERATE
    ok = r2.relative <= 1.5 * r1.relative / 4 + floor
    return r1, r2, ok


def randomized_identity_check(e, trials: int = 20, seed: int = 0) -> bool:
    """``|e| <= 1e-9 (1 + max |term|)`` at ``trials`` random points in [-2, 2]."""
    if trials < 20:
        raise ValueError("at least 20 trials are required")
    return randomized_zero(e, trials, np.random.default_rng(seed))
