"""Exact arithmetic in Z-graded (super)commuting polynomial algebras.

Generators carry an integer ghost number; parity is its mod-2 reduction.
Monomials are kept in a canonical normal form (factors sorted by
registration index) and every sign is produced by counting transpositions
of odd factors during the sort, so there is a single source of Koszul
signs for the whole workbench.

Coefficients are `fractions.Fraction` throughout; nothing in this module
ever touches floating point.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    DuplicateName,
    GeneratorCapExceeded,
    RegistryMismatch,
    ReservedName,
    WindowMismatch,
)

DEFAULT_GENERATOR_CAP = 4096
RESERVED_NAMES = ("hbar",)


def generator_cap() -> int:
    value = os.environ.get("BVBFV_MAX_GENERATORS")
    if value is None:
        return DEFAULT_GENERATOR_CAP
    return int(value)


@dataclass(frozen=True)
class Generator:
    name: str
    index: int
    ghost: int

    @property
    def parity(self) -> int:
        return self.ghost % 2

    def __repr__(self):
        return f"Generator({self.name!r}, index={self.index}, ghost={self.ghost})"


class GeneratorRegistry:
    """Immutable ordered collection of generators with unique names."""

    def __init__(self, specs: Iterable[tuple[str, int]]):
        gens = []
        by_name = {}
        for name, ghost in specs:
            if name in RESERVED_NAMES:
                raise ReservedName(f"generator name {name!r} is reserved")
            if name in by_name:
                raise DuplicateName(f"duplicate generator name {name!r}")
            gen = Generator(name, len(gens), int(ghost))
            gens.append(gen)
            by_name[name] = gen
        cap = generator_cap()
        if len(gens) > cap:
            raise GeneratorCapExceeded(
                f"{len(gens)} generators exceed the cap of {cap}"
            )
        self._gens = tuple(gens)
        self._by_name = by_name

    def __len__(self):
        return len(self._gens)

    def __iter__(self):
        return iter(self._gens)

    def __getitem__(self, index: int) -> Generator:
        return self._gens[index]

    def by_name(self, name: str) -> Generator:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self._gens)

    def parity(self, index: int) -> int:
        return self._gens[index].ghost % 2

    def ghost(self, index: int) -> int:
        return self._gens[index].ghost

    def extended(self, specs: Iterable[tuple[str, int]]) -> "GeneratorRegistry":
        """New registry with extra generators appended after the current ones."""
        return GeneratorRegistry(
            [(g.name, g.ghost) for g in self._gens] + list(specs)
        )


def register_generators(specs: Sequence[tuple[str, int]]) -> GeneratorRegistry:
    return GeneratorRegistry(specs)


class Monomial:
    """Product of generator powers in ascending index order.

    `factors` is a tuple of (generator index, exponent) with exponent >= 1.
    Odd generators never carry exponent > 1 (such products are zero and are
    filtered out before a Monomial is built). The empty tuple is the unit.
    """

    __slots__ = ("factors",)

    def __init__(self, factors: tuple[tuple[int, int], ...] = ()):
        self.factors = factors

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        return f"Monomial({self.factors!r})"

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.factors)

    def ghost(self, registry: GeneratorRegistry) -> int:
        return sum(e * registry.ghost(i) for i, e in self.factors)

    def parity(self, registry: GeneratorRegistry) -> int:
        return sum(e * registry.parity(i) for i, e in self.factors) % 2

    def contains(self, index: int) -> bool:
        return any(i == index for i, _ in self.factors)

    def exponent(self, index: int) -> int:
        for i, e in self.factors:
            if i == index:
                return e
        return 0

    def sort_key(self) -> tuple:
        # graded lexicographic: total degree first, then the factor tuple
        return (self.degree, self.factors)


UNIT = Monomial()


def merge_monomials(
    a: Monomial, b: Monomial, registry: GeneratorRegistry
) -> tuple[int, Monomial | None]:
    """Normal-form product of two monomials.

    Returns (sign, monomial); (0, None) when an odd square annihilates the
    term. The sign counts, mod 2, the odd-odd transpositions needed to merge
    the two sorted factor lists.
    """
    fa, fb = a.factors, b.factors
    if not fa:
        return 1, b
    if not fb:
        return 1, a
    # odd-parity count of the tail of `fa` not yet consumed
    odd_tail = [0] * (len(fa) + 1)
    for k in range(len(fa) - 1, -1, -1):
        i, e = fa[k]
        odd_tail[k] = odd_tail[k + 1] + (registry.parity(i) * e) % 2
    out: list[tuple[int, int]] = []
    sign = 1
    ia = ib = 0
    while ia < len(fa) and ib < len(fb):
        ga, ea = fa[ia]
        gb, eb = fb[ib]
        if ga < gb:
            out.append((ga, ea))
            ia += 1
        elif ga > gb:
            if registry.parity(gb) and odd_tail[ia] % 2:
                sign = -sign
            out.append((gb, eb))
            ib += 1
        else:
            if registry.parity(ga):
                return 0, None  # odd square
            out.append((ga, ea + eb))
            ia += 1
            ib += 1
    out.extend(fa[ia:])
    out.extend(fb[ib:])
    return sign, Monomial(tuple(out))


def left_strip(
    mono: Monomial, index: int, registry: GeneratorRegistry
) -> tuple[int, Monomial] | None:
    """Move one occurrence of generator `index` to the front and delete it.

    Returns (multiplicity * sign, remaining monomial) or None if absent.
    The Koszul sign counts the odd factors passed on the way to the front.
    """
    parity = registry.parity(index)
    odd_before = 0
    for pos, (i, e) in enumerate(mono.factors):
        if i == index:
            sign = -1 if (parity and odd_before % 2) else 1
            rest = list(mono.factors)
            if e == 1:
                del rest[pos]
            else:
                rest[pos] = (i, e - 1)
            return sign * e, Monomial(tuple(rest))
        odd_before += (registry.parity(i) * e) % 2
    return None


def right_strip(
    mono: Monomial, index: int, registry: GeneratorRegistry
) -> tuple[int, Monomial] | None:
    """Move one occurrence of generator `index` to the back and delete it."""
    parity = registry.parity(index)
    total_odd = mono.parity(registry)
    odd_before = 0
    for pos, (i, e) in enumerate(mono.factors):
        if i == index:
            odd_after = (total_odd - odd_before - (registry.parity(i) * e)) % 2
            sign = -1 if (parity and odd_after % 2) else 1
            rest = list(mono.factors)
            if e == 1:
                del rest[pos]
            else:
                rest[pos] = (i, e - 1)
            return sign * e, Monomial(tuple(rest))
        odd_before += (registry.parity(i) * e) % 2
    return None


class GradedPolynomial:
    """Finite Fraction-linear combination of normal-form monomials."""

    __slots__ = ("registry", "terms")

    def __init__(self, registry: GeneratorRegistry, terms: dict | None = None):
        self.registry = registry
        self.terms: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                c = Fraction(coeff)
                if c:
                    self.terms[mono] = c

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, registry):
        return cls(registry)

    @classmethod
    def constant(cls, registry, value):
        c = Fraction(value)
        if not c:
            return cls(registry)
        return cls(registry, {UNIT: c})

    @classmethod
    def generator(cls, registry, name_or_index, coeff=1):
        if isinstance(name_or_index, str):
            idx = registry.by_name(name_or_index).index
        else:
            idx = name_or_index
        return cls(registry, {Monomial(((idx, 1),)): Fraction(coeff)})

    # -- predicates ---------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def ghost_numbers(self) -> set[int]:
        return {m.ghost(self.registry) for m in self.terms}

    def is_ghost_homogeneous(self) -> bool:
        return len(self.ghost_numbers()) <= 1

    def ghost(self) -> int | None:
        """Ghost number of a homogeneous polynomial (None for 0 or mixed)."""
        ghosts = self.ghost_numbers()
        if len(ghosts) == 1:
            return ghosts.pop()
        return None

    def parity(self) -> int | None:
        parities = {m.parity(self.registry) for m in self.terms}
        if len(parities) == 1:
            return parities.pop()
        return None

    def max_degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def ghost_part(self, g: int) -> "GradedPolynomial":
        return GradedPolynomial(
            self.registry,
            {m: c for m, c in self.terms.items() if m.ghost(self.registry) == g},
        )

    def homogeneous_parts(self) -> list["GradedPolynomial"]:
        return [self.ghost_part(g) for g in sorted(self.ghost_numbers())]

    # -- arithmetic ---------------------------------------------------
    def _check(self, other):
        if self.registry is not other.registry:
            raise RegistryMismatch("operands built over different registries")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GradedPolynomial.constant(self.registry, other)
        self._check(other)
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            s = terms.get(mono, Fraction(0)) + c
            if s:
                terms[mono] = s
            else:
                terms.pop(mono, None)
        result = GradedPolynomial(self.registry)
        result.terms = terms
        return result

    def __neg__(self):
        return GradedPolynomial(
            self.registry, {m: -c for m, c in self.terms.items()}
        )

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GradedPolynomial.constant(self.registry, other)
        return self + (-other)

    def scale(self, value) -> "GradedPolynomial":
        c = Fraction(value)
        if not c:
            return GradedPolynomial(self.registry)
        return GradedPolynomial(
            self.registry, {m: c * v for m, v in self.terms.items()}
        )

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return mul(self, other)

    def __eq__(self, other):
        if not isinstance(other, GradedPolynomial):
            return NotImplemented
        return self.registry is other.registry and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def coefficient(self, mono: Monomial) -> Fraction:
        return self.terms.get(mono, Fraction(0))

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key())

    def __repr__(self):
        from .expressions import render

        return f"<GradedPolynomial {render(self)}>"


def mul(f: GradedPolynomial, g: GradedPolynomial) -> GradedPolynomial:
    """Graded-commutative normal-form product."""
    f._check(g)
    registry = f.registry
    terms: dict[Monomial, Fraction] = {}
    for ma, ca in f.terms.items():
        for mb, cb in g.terms.items():
            sign, mono = merge_monomials(ma, mb, registry)
            if sign == 0:
                continue
            c = terms.get(mono, Fraction(0)) + sign * ca * cb
            if c:
                terms[mono] = c
            else:
                terms.pop(mono, None)
    result = GradedPolynomial(registry)
    result.terms = terms
    return result


def left_derivative(f: GradedPolynomial, gen: Generator | str) -> GradedPolynomial:
    """Graded derivation from the left with respect to one generator."""
    registry = f.registry
    index = registry.by_name(gen).index if isinstance(gen, str) else gen.index
    terms: dict[Monomial, Fraction] = {}
    for mono, coeff in f.terms.items():
        stripped = left_strip(mono, index, registry)
        if stripped is None:
            continue
        mult, rest = stripped
        c = terms.get(rest, Fraction(0)) + mult * coeff
        if c:
            terms[rest] = c
        else:
            terms.pop(rest, None)
    result = GradedPolynomial(registry)
    result.terms = terms
    return result


def right_derivative(f: GradedPolynomial, gen: Generator | str) -> GradedPolynomial:
    """Graded derivation from the right (move the occurrence to the back)."""
    registry = f.registry
    index = registry.by_name(gen).index if isinstance(gen, str) else gen.index
    terms: dict[Monomial, Fraction] = {}
    for mono, coeff in f.terms.items():
        stripped = right_strip(mono, index, registry)
        if stripped is None:
            continue
        mult, rest = stripped
        c = terms.get(rest, Fraction(0)) + mult * coeff
        if c:
            terms[rest] = c
        else:
            terms.pop(rest, None)
    result = GradedPolynomial(registry)
    result.terms = terms
    return result


def table_derivation(registry: GeneratorRegistry, mapping: dict):
    """Left derivation determined by its values on generators.

    `mapping` sends generator indices (or names) to polynomials; absent
    generators map to zero.  Returns a callable on polynomials.
    """
    resolved = {}
    for key, poly in mapping.items():
        idx = registry.by_name(key).index if isinstance(key, str) else key
        if not poly.is_zero():
            resolved[idx] = poly

    def apply(f: GradedPolynomial) -> GradedPolynomial:
        out = GradedPolynomial.zero(registry)
        for idx, value in resolved.items():
            partial = left_derivative(f, registry[idx])
            if not partial.is_zero():
                out = out + mul(value, partial)
        return out

    return apply


class HbarSeries:
    """Truncated formal Laurent series in hbar with polynomial coefficients.

    Stored powers always lie inside [min_order, max_order]; arithmetic that
    would produce higher powers silently drops them and sets `truncated`.
    hbar itself carries ghost number 0.
    """

    __slots__ = ("registry", "min_order", "max_order", "coefficients", "truncated")

    def __init__(
        self,
        registry: GeneratorRegistry,
        coefficients: dict[int, GradedPolynomial] | None = None,
        min_order: int = 0,
        max_order: int = 4,
        truncated: bool = False,
    ):
        if min_order > max_order:
            raise WindowMismatch(
                f"empty window [{min_order}, {max_order}]"
            )
        self.registry = registry
        self.min_order = min_order
        self.max_order = max_order
        self.truncated = truncated
        self.coefficients: dict[int, GradedPolynomial] = {}
        if coefficients:
            for power, poly in coefficients.items():
                if poly.is_zero():
                    continue
                if power > max_order:
                    self.truncated = True
                    continue
                if power < min_order:
                    raise WindowMismatch(
                        f"power {power} below window minimum {min_order}"
                    )
                self.coefficients[power] = poly

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, registry, min_order=0, max_order=4):
        return cls(registry, None, min_order, max_order)

    @classmethod
    def from_poly(cls, poly: GradedPolynomial, power=0, min_order=0, max_order=4):
        return cls(poly.registry, {power: poly}, min_order, max_order)

    @classmethod
    def constant(cls, registry, value, min_order=0, max_order=4):
        return cls.from_poly(
            GradedPolynomial.constant(registry, value),
            0,
            min_order,
            max_order,
        )

    # -- access -------------------------------------------------------
    def coefficient(self, power: int) -> GradedPolynomial:
        return self.coefficients.get(power, GradedPolynomial.zero(self.registry))

    def is_zero(self) -> bool:
        return not self.coefficients

    def powers(self) -> list[int]:
        return sorted(self.coefficients)

    def _check(self, other: "HbarSeries"):
        if self.registry is not other.registry:
            raise RegistryMismatch("series built over different registries")
        if (self.min_order, self.max_order) != (other.min_order, other.max_order):
            raise WindowMismatch(
                f"windows [{self.min_order},{self.max_order}] and "
                f"[{other.min_order},{other.max_order}] differ"
            )

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other: "HbarSeries") -> "HbarSeries":
        self._check(other)
        coeffs = dict(self.coefficients)
        for power, poly in other.coefficients.items():
            s = coeffs.get(power)
            coeffs[power] = poly if s is None else s + poly
        return HbarSeries(
            self.registry,
            coeffs,
            self.min_order,
            self.max_order,
            self.truncated or other.truncated,
        )

    def __neg__(self):
        return HbarSeries(
            self.registry,
            {p: -poly for p, poly in self.coefficients.items()},
            self.min_order,
            self.max_order,
            self.truncated,
        )

    def __sub__(self, other):
        return self + (-other)

    def scale(self, value) -> "HbarSeries":
        return HbarSeries(
            self.registry,
            {p: poly.scale(value) for p, poly in self.coefficients.items()},
            self.min_order,
            self.max_order,
            self.truncated,
        )

    def rewindow(self, min_order: int, max_order: int) -> "HbarSeries":
        """Move to a wider (or equal) window; never drops coefficients."""
        for p in self.coefficients:
            if p < min_order or p > max_order:
                raise WindowMismatch(
                    f"coefficient at order {p} outside requested window "
                    f"[{min_order}, {max_order}]"
                )
        return HbarSeries(
            self.registry, dict(self.coefficients), min_order, max_order, self.truncated
        )

    def shift(self, delta: int) -> "HbarSeries":
        """Multiply by hbar**delta (window-checked, truncating above)."""
        truncated = self.truncated
        coeffs = {}
        for p, poly in self.coefficients.items():
            q = p + delta
            if q > self.max_order:
                truncated = True
                continue
            coeffs[q] = poly
        return HbarSeries(
            self.registry, coeffs, self.min_order, self.max_order, truncated
        )

    def __eq__(self, other):
        if not isinstance(other, HbarSeries):
            return NotImplemented
        return (
            self.registry is other.registry
            and self.coefficients == other.coefficients
        )

    def __hash__(self):
        return hash(frozenset((p, hash(c)) for p, c in self.coefficients.items()))

    def __repr__(self):
        from .expressions import render_series

        return f"<HbarSeries {render_series(self)}>"


def series_mul(a: HbarSeries, b: HbarSeries) -> HbarSeries:
    """Cauchy product truncated to the common window."""
    a._check(b)
    registry = a.registry
    coeffs: dict[int, GradedPolynomial] = {}
    truncated = a.truncated or b.truncated
    for pa, fa in a.coefficients.items():
        for pb, fb in b.coefficients.items():
            p = pa + pb
            if p > a.max_order:
                truncated = True
                continue
            if p < a.min_order:
                raise WindowMismatch(
                    f"product order {p} fell below window minimum {a.min_order}"
                )
            prod = mul(fa, fb)
            if prod.is_zero():
                continue
            s = coeffs.get(p)
            coeffs[p] = prod if s is None else s + prod
    return HbarSeries(registry, coeffs, a.min_order, a.max_order, truncated)
