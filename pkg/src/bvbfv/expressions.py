"""Expression parser and canonical renderer for graded polynomials.

Grammar (whitespace-insensitive):

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := '-'* atom ('^' INT)?
    atom   := INT ('/' INT)? | IDENT | '(' expr ')'

Exponents must be non-negative integer literals.  Identifiers must be
registered generators.  The renderer emits a canonical form (terms in
graded-lexicographic order, rational coefficients as p/q) that parses
back to the same polynomial.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .core import GeneratorRegistry, GradedPolynomial, HbarSeries, mul
from .errors import ExpressionError, NegativeExponent, UnknownIdentifier

_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_.']*)|(?P<op>[-+*^()/]))"
)


class _Lexer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        while self.pos < len(src):
            m = _TOKEN.match(src, self.pos)
            if m is None or m.end() == self.pos:
                rest = src[self.pos :].lstrip()
                if not rest:
                    break
                col = len(src) - len(rest) + 1
                raise ExpressionError(
                    f"unexpected character {rest[0]!r} at position {col}", col
                )
            self.pos = m.end()
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind) + 1))
        self.index = 0

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return ("eof", "", len(self.src) + 1)

    def next(self):
        tok = self.peek()
        if tok[0] != "eof":
            self.index += 1
        return tok


class _Parser:
    def __init__(self, src: str, registry: GeneratorRegistry, warnings):
        self.lex = _Lexer(src)
        self.registry = registry
        self.warnings = warnings if warnings is not None else []

    def parse(self) -> GradedPolynomial:
        result = self.expr()
        kind, text, pos = self.lex.peek()
        if kind != "eof":
            raise ExpressionError(f"unexpected {text!r} at position {pos}", pos)
        return result

    def expr(self) -> GradedPolynomial:
        result = self.term()
        while True:
            kind, text, _ = self.lex.peek()
            if kind == "op" and text in "+-":
                self.lex.next()
                rhs = self.term()
                result = result + rhs if text == "+" else result - rhs
            else:
                return result

    def term(self) -> GradedPolynomial:
        result = self.factor()
        while True:
            kind, text, _ = self.lex.peek()
            if kind == "op" and text == "*":
                self.lex.next()
                result = mul(result, self.factor())
            else:
                return result

    def factor(self) -> GradedPolynomial:
        sign = 1
        while True:
            kind, text, _ = self.lex.peek()
            if kind == "op" and text == "-":
                self.lex.next()
                sign = -sign
            else:
                break
        base, odd_gen = self.atom()
        kind, text, pos = self.lex.peek()
        if kind == "op" and text == "^":
            self.lex.next()
            kind, text, pos = self.lex.peek()
            if kind == "op" and text == "-":
                raise NegativeExponent(
                    f"negative exponent at position {pos}", pos
                )
            if kind != "int":
                raise ExpressionError(
                    f"exponent must be an integer literal at position {pos}", pos
                )
            self.lex.next()
            exponent = int(text)
            if odd_gen is not None and exponent >= 2:
                self.warnings.append(
                    f"odd generator {odd_gen!r} raised to power {exponent}; term is 0"
                )
            result = GradedPolynomial.constant(self.registry, 1)
            for _ in range(exponent):
                result = mul(result, base)
            base = result
        return base.scale(sign)

    def atom(self) -> tuple[GradedPolynomial, str | None]:
        kind, text, pos = self.lex.next()
        if kind == "int":
            value = Fraction(int(text))
            nkind, ntext, _ = self.lex.peek()
            if nkind == "op" and ntext == "/":
                self.lex.next()
                dkind, dtext, dpos = self.lex.next()
                if dkind != "int":
                    raise ExpressionError(
                        f"expected denominator at position {dpos}", dpos
                    )
                value = value / int(dtext)
            return GradedPolynomial.constant(self.registry, value), None
        if kind == "ident":
            if text not in self.registry:
                raise UnknownIdentifier(
                    f"unknown identifier {text!r} at position {pos}", pos
                )
            gen = self.registry.by_name(text)
            odd = text if gen.parity else None
            return GradedPolynomial.generator(self.registry, text), odd
        if kind == "op" and text == "(":
            inner = self.expr()
            ckind, ctext, cpos = self.lex.next()
            if not (ckind == "op" and ctext == ")"):
                raise ExpressionError(f"expected ')' at position {cpos}", cpos)
            return inner, None
        raise ExpressionError(f"unexpected {text or 'end of input'!r} at position {pos}", pos)


def parse_expression(
    src: str, registry: GeneratorRegistry, warnings: list | None = None
) -> GradedPolynomial:
    return _Parser(src, registry, warnings).parse()


def _render_coefficient(c: Fraction) -> str:
    return str(c) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render(f: GradedPolynomial) -> str:
    """Canonical string form; parse_expression(render(f)) == f."""
    if f.is_zero():
        return "0"
    parts = []
    for mono, coeff in f.sorted_terms():
        factors = [
            f"{f.registry[i].name}^{e}" if e > 1 else f.registry[i].name
            for i, e in mono.factors
        ]
        if not factors:
            body = _render_coefficient(coeff)
        elif coeff == 1:
            body = "*".join(factors)
        elif coeff == -1:
            body = "-" + "*".join(factors)
        else:
            body = "*".join([_render_coefficient(coeff)] + factors)
        parts.append(body)
    out = parts[0]
    for part in parts[1:]:
        if part.startswith("-"):
            out += " - " + part[1:]
        else:
            out += " + " + part
    return out


def render_series(series: HbarSeries) -> str:
    if series.is_zero():
        return "0"
    parts = []
    for power in series.powers():
        poly = render(series.coefficient(power))
        if power == 0:
            parts.append(f"({poly})")
        else:
            parts.append(f"hbar^{power}*({poly})")
    return " + ".join(parts)
