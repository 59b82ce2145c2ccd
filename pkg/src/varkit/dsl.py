"""The ``.vk`` model format.

::

    # harmonic oscillator
    space { base: x; fiber: u; order: 2 }
    equation f_u = u + u_xx;
    vectorfield T = d/dx;
    vectorfield S = sin(x)*d/du;
    current E = (u^2 + u_x^2)/2;
    section s = x^2;

Derivative coordinates are written by index suffix, ``u_xy`` for the mixed
second derivative.  With ``n > 1`` currents take a bracketed component list
``[J1, J2]``; with ``m > 1`` so do sections.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .jet import ATOMS, DEFAULT_MAX_ORDER, JetError, JetSpace, canonical, order_of, to_text
from .symmetry import ProjectableVectorField
from .varcalc import CurrentDensity, SourceForm


class DSLError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<deriv>d/d[A-Za-z][A-Za-z0-9]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^()\[\]{},;:=])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DSLError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class ModelFile:
    space: JetSpace
    order: int
    equations: tuple
    fields: dict = field(default_factory=dict)
    currents: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)

    @property
    def source(self) -> SourceForm:
        return SourceForm(self.space, self.equations)

    def field(self, name: str) -> ProjectableVectorField:
        try:
            return self.fields[name]
        except KeyError:
            raise DSLError(f"no vectorfield named {name!r}") from None

    def current(self, name: str) -> CurrentDensity:
        try:
            return CurrentDensity(self.space, self.currents[name])
        except KeyError:
            raise DSLError(f"no current named {name!r}") from None


class _Parser:
    def __init__(self, text: str, space: JetSpace | None = None):
        self.tokens = tokenize(text)
        self.pos = 0
        self.space = space
        self._placeholders: dict[str, sp.Symbol] = {}
        self.allow_deriv = False

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise DSLError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op", "ident"):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    # -- expressions --
    def expression(self):
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance()
            rhs = self.unary()
            if op.text == "/":
                if rhs == 0:
                    self.error("division by zero", op)
                if self.space is not None and self.space.jet_symbols(rhs):
                    self.error("division by a fibre-dependent expression leaves the polynomial fragment", op)
                e = e / rhs
            else:
                e = e * rhs
        return e

    def unary(self):
        if self.tok.text in ("-", "+") and self.tok.kind == "op":
            op = self.advance().text
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text in ("^", "**") and self.tok.kind == "op":
            op = self.advance()
            exp = self.unary()
            if self.space is not None and self.space.jet_symbols(exp):
                self.error("exponent may not depend on fibre coordinates", op)
            if self.space is not None and self.space.jet_symbols(base) and not (
                exp.is_Integer and exp >= 0
            ):
                self.error("fibre coordinates may only carry nonnegative integer powers", op)
            return base**exp
        return base

    def atom(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            return sp.Rational(t.text)
        if t.kind == "deriv":
            if not self.allow_deriv:
                self.error(f"{t.text} is only allowed in a vectorfield")
            self.advance()
            return self.placeholder(t.text[3:], t)
        if t.text == "(":
            self.advance()
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.advance()
            if self.tok.text == "(":
                return self.call(t)
            return self.resolve(t)
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def call(self, name: Token):
        fn = ATOMS.get(name.text)
        if fn is None:
            self.error(f"unknown function {name.text!r} (allowed: {', '.join(ATOMS)})", name)
        self.expect("(")
        arg = self.expression()
        self.expect(")")
        if self.space is not None and self.space.jet_symbols(arg):
            self.error(f"{name.text}() may only be applied to base coordinates", name)
        return fn(arg)

    def placeholder(self, name: str, tok: Token):
        sp_ = self.space
        if sp_ is None or (name not in sp_.base and name not in sp_.fiber):
            self.error(f"d/d{name}: {name!r} is not a declared coordinate", tok)
        return self._placeholders.setdefault(name, sp.Symbol(f"__d_{name}"))

    def resolve(self, t: Token):
        name = t.text
        if name == "pi":
            return sp.pi
        sp_ = self.space
        if sp_ is None:
            self.error(f"undeclared identifier {name!r}", t)
        if name in sp_.base:
            return sp_.x[sp_.base.index(name)]
        if name in sp_.fiber:
            return sp_.coord(sp_.fiber.index(name))
        head, sep, suffix = name.partition("_")
        if sep and head in sp_.fiber and suffix:
            index = _split_suffix(suffix, sp_.base)
            if index is None:
                self.error(f"undeclared coordinate {name!r}: {suffix!r} is not a sequence of base names", t)
            if len(index) > sp_.max_order:
                self.error(f"coordinate {name!r} exceeds the jet order {sp_.max_order}", t)
            return sp_.coord(sp_.fiber.index(head), index)
        self.error(f"undeclared coordinate {name!r}", t)

    def vector_field(self, tok: Token):
        self.allow_deriv = True
        try:
            e = sp.expand(self.expression())
        finally:
            self.allow_deriv = False
        sp_ = self.space
        ph = self._placeholders
        coeffs = []
        for name in sp_.base + sp_.fiber:
            P = ph.get(name)
            coeffs.append(sp.Integer(0) if P is None else e.coeff(P))
        rest = sp.expand(e - sum((c * ph[nm] for c, nm in zip(coeffs, sp_.base + sp_.fiber) if nm in ph),
                                 sp.Integer(0)))
        if rest != 0 or any(c.free_symbols & set(ph.values()) for c in coeffs):
            self.error("a vectorfield must be a linear combination of d/d<coordinate> terms", tok)
        return coeffs[: sp_.n], coeffs[sp_.n:]

    # -- statements --
    def model(self) -> ModelFile:
        if self.tok.text != "space":
            self.error("a model must start with a 'space { ... }' block")
        order = self.space_block()
        sp_ = self.space
        equations: dict[int, sp.Expr] = {}
        fields, currents, sections = {}, {}, {}
        while self.tok.kind != "eof":
            kw = self.expect_ident()
            if kw.text == "equation":
                name = self.expect_ident()
                head, _, fib = name.text.partition("_")
                if head != "f" or fib not in sp_.fiber:
                    self.error(f"equation name must be f_<fibre>, got {name.text!r}", name)
                alpha = sp_.fiber.index(fib)
                if alpha in equations:
                    self.error(f"duplicate equation for {fib!r}", name)
                self.expect("=")
                e = canonical(self.expression())
                if order_of(sp_, e) > order:
                    self.error(f"equation has order {order_of(sp_, e)} above the declared order {order}", name)
                equations[alpha] = e
            elif kw.text == "vectorfield":
                name = self.expect_ident()
                self._unique(name, fields)
                self.expect("=")
                base, fib = self.vector_field(name)
                try:
                    fields[name.text] = ProjectableVectorField(sp_, base, fib, name.text)
                except JetError as exc:
                    self.error(str(exc), name)
            elif kw.text in ("current", "section"):
                name = self.expect_ident()
                target = currents if kw.text == "current" else sections
                self._unique(name, target)
                self.expect("=")
                size = sp_.n if kw.text == "current" else sp_.m
                comps = self.components(size, name)
                if kw.text == "section" and any(sp_.jet_symbols(c) for c in comps):
                    self.error("a section depends on the base coordinates only", name)
                target[name.text] = comps
            else:
                self.error(f"unknown statement {kw.text!r}", kw)
            self.expect(";")
        missing = [sp_.fiber[a] for a in range(sp_.m) if a not in equations]
        if missing:
            self.error(f"missing equation for fibre(s) {', '.join(missing)}")
        return ModelFile(sp_, order, tuple(equations[a] for a in range(sp_.m)),
                         fields, currents, sections)

    def _unique(self, name: Token, table: dict):
        if name.text in table:
            self.error(f"duplicate name {name.text!r}", name)

    def components(self, size: int, name: Token) -> tuple:
        if self.tok.text == "[":
            self.advance()
            comps = [canonical(self.expression())]
            while self.tok.text == ",":
                self.advance()
                comps.append(canonical(self.expression()))
            self.expect("]")
        else:
            comps = [canonical(self.expression())]
        if len(comps) != size:
            self.error(f"{name.text} needs {size} component(s), got {len(comps)}", name)
        return tuple(comps)

    def space_block(self) -> int:
        self.expect("space")
        self.expect("{")
        base = fiber = None
        order = 2
        while self.tok.text != "}":
            key = self.expect_ident()
            self.expect(":")
            if key.text in ("base", "fiber"):
                names = [self.expect_ident().text]
                while self.tok.text == ",":
                    self.advance()
                    names.append(self.expect_ident().text)
                for nm in names:
                    if "_" in nm or nm in ATOMS or nm in ("pi", "d"):
                        self.error(f"{nm!r} cannot be used as a coordinate name", key)
                if key.text == "base":
                    base = names
                else:
                    fiber = names
            elif key.text == "order":
                t = self.advance()
                if t.kind != "number" or not t.text.isdigit() or int(t.text) < 0:
                    self.error("order must be a nonnegative integer", t)
                order = int(t.text)
            else:
                self.error(f"unknown space key {key.text!r}", key)
            if self.tok.text == ";":
                self.advance()
        self.expect("}")
        if base is None or fiber is None:
            self.error("space needs both 'base' and 'fiber'")
        try:
            self.space = JetSpace(tuple(base), tuple(fiber), max(DEFAULT_MAX_ORDER, order + 4))
        except JetError as exc:
            self.error(str(exc))
        return order


def _split_suffix(suffix: str, base: tuple[str, ...]) -> tuple[int, ...] | None:
    """Split ``xy`` into base indices, longest names first."""
    names = sorted(range(len(base)), key=lambda i: -len(base[i]))
    out = []
    pos = 0
    while pos < len(suffix):
        for i in names:
            if suffix.startswith(base[i], pos):
                out.append(i)
                pos += len(base[i])
                break
        else:
            return None
    return tuple(sorted(out))


def parse(text: str) -> ModelFile:
    return _Parser(text).model()


def parse_expression(text: str, space: JetSpace | None = None) -> sp.Expr:
    """One expression; without a space only numbers and ``pi`` are allowed."""
    p = _Parser(text, space)
    e = p.expression()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after expression")
    return canonical(e)


def parse_components(text: str, space: JetSpace, size: int) -> tuple:
    p = _Parser(text, space)
    comps = p.components(size, Token("ident", "value", 1, 1))
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return comps


def serialize(model: ModelFile) -> str:
    sp_ = model.space
    lines = [f"space {{ base: {', '.join(sp_.base)}; fiber: {', '.join(sp_.fiber)}; order: {model.order} }}"]
    for a, e in enumerate(model.equations):
        lines.append(f"equation f_{sp_.fiber[a]} = {to_text(e, sp_)};")
    for name, V in model.fields.items():
        lines.append(f"vectorfield {name} = {V.describe()};")

    def comps(c):
        return to_text(c[0], sp_) if len(c) == 1 else "[" + ", ".join(to_text(e, sp_) for e in c) + "]"

    for name, c in model.currents.items():
        lines.append(f"current {name} = {comps(c)};")
    for name, c in model.sections.items():
        lines.append(f"section {name} = {comps(c)};")
    return "\n".join(lines) + "\n"
