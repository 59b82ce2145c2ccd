"""Seeded random polynomial instances for the identity suites."""
from __future__ import annotations

import random

import sympy as sp

from varkit.jet import JetSpace
from varkit.symmetry import ProjectableVectorField

BASES = {1: ("x",), 2: ("x", "y")}
FIBRES = {1: ("u",), 2: ("u", "v")}


def space(n: int, m: int) -> JetSpace:
    return JetSpace(BASES[n], FIBRES[m])


def coords_upto(sp_: JetSpace, order: int) -> list:
    return [s for r in range(order + 1) for s in sp_.coords_of_order(r)]


def coefficient(rng: random.Random) -> int:
    c = 0
    while c == 0:
        c = rng.randint(-3, 3)
    return c


def polynomial(rng: random.Random, gens: list, terms: int, degree: int,
               xs: tuple = ()) -> sp.Expr:
    """Sum of ``terms`` monomials with nonzero coefficients in [-3, 3]."""
    e = sp.Integer(0)
    for _ in range(terms):
        t = sp.Integer(coefficient(rng))
        for _ in range(rng.randint(0, degree)):
            t *= rng.choice(gens)
        if xs and rng.random() < 0.3:
            t *= rng.choice(xs)
        e += t
    return sp.expand(e)


def source(rng: random.Random, sp_: JetSpace, terms: int = 4, degree: int = 2) -> tuple:
    gens = coords_upto(sp_, 2)
    return tuple(polynomial(rng, gens, terms, degree, sp_.x) for _ in range(sp_.m))


def lagrangian(rng: random.Random, sp_: JetSpace, order: int = 1, terms: int = 4,
               degree: int = 3) -> sp.Expr:
    return polynomial(rng, coords_upto(sp_, order), terms, degree, sp_.x)


def vector_field(rng: random.Random, sp_: JetSpace) -> ProjectableVectorField:
    base = tuple(polynomial(rng, list(sp_.x), 2, 2) for _ in range(sp_.n))
    fib = tuple(polynomial(rng, list(sp_.x) + coords_upto(sp_, 0), 2, 2) for _ in range(sp_.m))
    return ProjectableVectorField(sp_, base, fib)


def cases(count: int, seed: int):
    """``count`` (rng, n, m) triples cycling through all n, m <= 2."""
    shapes = [(1, 1), (1, 2), (2, 1), (2, 2)]
    for k in range(count):
        n, m = shapes[k % 4]
        yield random.Random(seed * 100003 + k), n, m
