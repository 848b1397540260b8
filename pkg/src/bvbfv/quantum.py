"""Standard-ordered quantization of polarized boundary algebras.

Operators keep every derivative to the right of every coefficient; they
are represented over an extended registry carrying one derivative symbol
per base generator, so the monomial normal form *is* the normal ordering
and all operator Koszul signs come from the same transposition engine as
the polynomial algebra.

The star product is literally symbol(quantize(f) o quantize(g)), which
makes associativity and the symbol-calculus identity exact by
construction.  The fiber weights are fixed so that the hbar-linear part
of the graded star commutator is the Poisson bracket of the boundary
pairing:

    f * g - (-1)^(|f||g|) g * f  =  hbar {f, g} + O(hbar^2).

All formulas use the single formal parameter hbar of the workbench: the
conventional factors of i of the operator picture are absorbed into it
(kappa below is a sign, not i), which keeps every coefficient rational.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .cohomology import ObstructionCertificate
from .core import (
    GeneratorRegistry,
    GradedPolynomial,
    HbarSeries,
    Monomial,
    left_derivative,
    mul,
    series_mul,
)
from .errors import (
    ClassicalMasterFailure,
    ClosednessFailure,
    LaurentWindowExceeded,
    RegistryMismatch,
)
from .symplectic import BVLaplacian, SymplecticStructure, bracket, laplacian


@dataclass(frozen=True)
class Polarization:
    """Darboux split of an even boundary pairing into base and fiber."""

    omega: SymplecticStructure
    base: tuple[int, ...]
    fiber: tuple[int, ...]
    weights: tuple[Fraction, ...]  # bracket(base_i, fiber_i)

    @classmethod
    def from_base_names(cls, omega: SymplecticStructure, base_names):
        registry = omega.registry
        base_set = {
            registry.by_name(n).index if isinstance(n, str) else n
            for n in base_names
        }
        base, fiber, weights = [], [], []
        for u, v, s in omega.pairs:
            if u in base_set and v not in base_set:
                b, p, w = u, v, s
            elif v in base_set and u not in base_set:
                # bracket(v, u) = -(-1)^(parity(u) parity(v)) s at ghost_w = 0
                sign = -1 if registry.parity(u) == 0 else 1
                b, p, w = v, u, sign * s
            else:
                raise ValueError(
                    f"pair ({registry[u].name}, {registry[v].name}) is not split "
                    "into one base and one fiber member"
                )
            base.append(b)
            fiber.append(p)
            weights.append(Fraction(w))
        leftover = base_set - set(base)
        if leftover:
            names = ", ".join(registry[i].name for i in sorted(leftover))
            raise ValueError(f"base names not part of the pairing: {names}")
        return cls(omega, tuple(base), tuple(fiber), tuple(weights))


class StarAlgebra:
    """Polarized boundary algebra with a truncation order for hbar."""

    def __init__(self, polarization: Polarization, max_order: int = 4):
        self.polarization = polarization
        self.max_order = max_order
        self.registry = polarization.omega.registry
        registry = self.registry
        self.ext_registry = registry.extended(
            [
                (f"@{registry[b].name}", -registry.ghost(b))
                for b in polarization.base
            ]
        )
        self.d_index = {}
        self.base_of_d = {}
        for pos, b in enumerate(polarization.base):
            d_idx = len(registry) + pos
            self.d_index[b] = d_idx
            self.base_of_d[d_idx] = b
        # p_hat_i = kappa_i * hbar * s_i * d/d b_i with kappa = -(-1)^parity(b)
        self.fiber_weight = {}
        self.fiber_of_d = {}
        for b, p, s in zip(
            polarization.base, polarization.fiber, polarization.weights
        ):
            kappa = 1 if registry.parity(b) else -1
            self.fiber_weight[p] = (Fraction(kappa) * s, self.d_index[b])
            self.fiber_of_d[self.d_index[b]] = (p, Fraction(kappa) * s)

    def embed(self, f: GradedPolynomial) -> GradedPolynomial:
        """Same monomials, extended registry."""
        if f.registry is not self.registry:
            raise RegistryMismatch("polynomial not over the boundary registry")
        return GradedPolynomial(self.ext_registry, dict(f.terms))

    def restrict(self, f: GradedPolynomial) -> GradedPolynomial:
        for mono in f.terms:
            for idx, _ in mono.factors:
                if idx >= len(self.registry):
                    raise RegistryMismatch("operator symbols left in polynomial")
        return GradedPolynomial(self.registry, dict(f.terms))

    def operator_window(self, extra: int = 0) -> tuple[int, int]:
        return (0, self.max_order + extra)

    def bracket(self, f, g):
        return bracket(f, g, self.polarization.omega)


@dataclass
class DifferentialOperator:
    """Normal-ordered operator: hbar series over the extended registry.

    Every monomial factors as (coefficient in base/fiber-free generators)
    times (derivative word); fiber generators never appear.
    """

    algebra: StarAlgebra
    series: HbarSeries

    @classmethod
    def from_terms(cls, algebra: StarAlgebra, terms, min_order=0, max_order=None):
        """Build an operator from (hbar power, coefficient, derivative names).

        The derivative list applies left to right (rightmost acts first);
        coefficients are polynomials over the boundary registry.
        """
        if max_order is None:
            max_order = algebra.max_order + 4
        ext = algebra.ext_registry
        coeffs: dict[int, GradedPolynomial] = {}
        for power, coeff_poly, derivative_names in terms:
            piece = algebra.embed(coeff_poly)
            for name in derivative_names:
                base_idx = (
                    algebra.registry.by_name(name).index
                    if isinstance(name, str)
                    else name
                )
                d_poly = GradedPolynomial.generator(ext, algebra.d_index[base_idx])
                piece = mul(piece, d_poly)
            if piece.is_zero():
                continue
            prev = coeffs.setdefault(power, GradedPolynomial.zero(ext))
            coeffs[power] = prev + piece
        return cls(algebra, HbarSeries(ext, coeffs, min_order, max_order))

    def is_zero(self):
        return self.series.is_zero()

    def __add__(self, other: "DifferentialOperator"):
        return DifferentialOperator(self.algebra, self.series + other.series)

    def __sub__(self, other: "DifferentialOperator"):
        return DifferentialOperator(self.algebra, self.series - other.series)

    def scale(self, value):
        return DifferentialOperator(self.algebra, self.series.scale(value))

    def shift(self, delta: int):
        return DifferentialOperator(self.algebra, self.series.shift(delta))

    def __eq__(self, other):
        return (
            isinstance(other, DifferentialOperator)
            and self.algebra is other.algebra
            and self.series == other.series
        )


def _substitute_factors(
    f: GradedPolynomial,
    target_registry: GeneratorRegistry,
    mapping,
) -> dict[Monomial, tuple[Fraction, int]]:
    """Per-monomial linear generator substitution.

    mapping: index -> (scalar, new index, hbar shift) or None to keep.
    Returns dict mono -> (coefficient, total hbar shift).
    """
    out: dict[Monomial, tuple[Fraction, int]] = {}
    for mono, coeff in f.terms.items():
        acc = GradedPolynomial.constant(target_registry, 1)
        scalar = Fraction(coeff)
        shift = 0
        for idx, exp in mono.factors:
            entry = mapping(idx)
            if entry is None:
                new_idx, weight, dshift = idx, Fraction(1), 0
            else:
                weight, new_idx, dshift = entry
            for _ in range(exp):
                acc = mul(acc, GradedPolynomial.generator(target_registry, new_idx))
                scalar *= weight
                shift += dshift
            if acc.is_zero():
                break
        if acc.is_zero():
            continue
        for new_mono, sign in acc.terms.items():
            key = (new_mono, shift)
            prev = out.get(key, Fraction(0))
            value = prev + sign * scalar
            if value:
                out[key] = value
            else:
                out.pop(key, None)
    return out


def quantize_standard_order(
    f: GradedPolynomial, algebra: StarAlgebra
) -> DifferentialOperator:
    """Replace each fiber generator by its weighted base derivative.

    The substitution preserves the left-to-right factor order, so the
    normal form of the result is the standard ordering with all
    derivatives rightmost.
    """
    embedded = algebra.embed(f)

    def mapping(idx):
        entry = algebra.fiber_weight.get(idx)
        if entry is None:
            return None
        weight, d_idx = entry
        return (weight, d_idx, 1)

    produced = _substitute_factors(embedded, algebra.ext_registry, mapping)
    coeffs: dict[int, GradedPolynomial] = {}
    window = algebra.operator_window(extra=f.max_degree())
    for (mono, shift), value in produced.items():
        poly = coeffs.setdefault(shift, GradedPolynomial.zero(algebra.ext_registry))
        coeffs[shift] = poly + GradedPolynomial(algebra.ext_registry, {mono: value})
    return DifferentialOperator(
        algebra, HbarSeries(algebra.ext_registry, coeffs, window[0], window[1])
    )


def symbol(op: DifferentialOperator) -> HbarSeries:
    """Inverse of quantize: each derivative becomes its fiber generator."""
    algebra = op.algebra

    def mapping(idx):
        entry = algebra.fiber_of_d.get(idx)
        if entry is None:
            return None
        p, weight = entry
        return (Fraction(1) / weight, p, -1)

    coeffs: dict[int, GradedPolynomial] = {}
    truncated = op.series.truncated
    for power, poly in op.series.coefficients.items():
        produced = _substitute_factors(poly, algebra.ext_registry, mapping)
        for (mono, shift), value in produced.items():
            p = power + shift
            prev = coeffs.setdefault(p, GradedPolynomial.zero(algebra.registry))
            coeffs[p] = prev + GradedPolynomial(algebra.registry, {mono: value})
    out: dict[int, GradedPolynomial] = {}
    for p, poly in coeffs.items():
        if poly.is_zero():
            continue
        if p > algebra.max_order:
            truncated = True
            continue
        out[p] = algebra.restrict(poly)
    return HbarSeries(algebra.registry, out, 0, algebra.max_order, truncated)


def _derivative_word(mono: Monomial, algebra: StarAlgebra):
    """Split an extended monomial into (coefficient part, derivative word)."""
    coeff_factors = []
    word = []
    for idx, exp in mono.factors:
        if idx in algebra.base_of_d:
            word.extend([idx] * exp)
        else:
            coeff_factors.append((idx, exp))
    return Monomial(tuple(coeff_factors)), word


def _compose_word_with(
    word: list[int], target: GradedPolynomial, algebra: StarAlgebra
) -> GradedPolynomial:
    """Normal order (derivative word) o (extended polynomial).

    Uses D o M_g = M_(dg) + (-1)^(|D||g|) M_g o D factor by factor,
    rightmost derivative first.
    """
    ext = algebra.ext_registry
    result = target
    for d_idx in reversed(word):
        base_idx = algebra.base_of_d[d_idx]
        d_parity = ext.parity(d_idx)
        acc = left_derivative(result, ext[base_idx])
        d_poly = GradedPolynomial.generator(ext, d_idx)
        for mono, coeff in result.terms.items():
            sign = -1 if (d_parity and mono.parity(ext) % 2) else 1
            passed = mul(GradedPolynomial(ext, {mono: coeff * sign}), d_poly)
            acc = acc + passed
        result = acc
    return result


def operator_compose(
    A: DifferentialOperator, B: DifferentialOperator
) -> DifferentialOperator:
    """Normal-ordered composition A o B."""
    algebra = A.algebra
    if algebra is not B.algebra:
        raise RegistryMismatch("operators over different algebras")
    ext = algebra.ext_registry
    # compose exactly: output powers reach the sum of the input orders
    max_o = A.series.max_order + B.series.max_order
    coeffs: dict[int, GradedPolynomial] = {}
    truncated = A.series.truncated or B.series.truncated
    for pa, fa in A.series.coefficients.items():
        for pb, fb in B.series.coefficients.items():
            p = pa + pb
            for mono, coeff in fa.terms.items():
                coeff_part, word = _derivative_word(mono, algebra)
                pushed = _compose_word_with(word, fb, algebra)
                if pushed.is_zero():
                    continue
                piece = mul(
                    GradedPolynomial(ext, {coeff_part: coeff}), pushed
                )
                if piece.is_zero():
                    continue
                prev = coeffs.setdefault(p, GradedPolynomial.zero(ext))
                coeffs[p] = prev + piece
    coeffs = {p: poly for p, poly in coeffs.items() if not poly.is_zero()}
    return DifferentialOperator(
        algebra, HbarSeries(ext, coeffs, 0, max_o, truncated)
    )


def operator_apply(op: DifferentialOperator, h: GradedPolynomial) -> HbarSeries:
    """Apply a differential operator to a boundary polynomial."""
    algebra = op.algebra
    target = algebra.embed(h)
    coeffs: dict[int, GradedPolynomial] = {}
    for power, poly in op.series.coefficients.items():
        for mono, coeff in poly.terms.items():
            coeff_part, word = _derivative_word(mono, algebra)
            value = target
            for d_idx in reversed(word):
                value = left_derivative(value, algebra.ext_registry[algebra.base_of_d[d_idx]])
                if value.is_zero():
                    break
            if value.is_zero():
                continue
            piece = mul(GradedPolynomial(algebra.ext_registry, {coeff_part: coeff}), value)
            if piece.is_zero():
                continue
            prev = coeffs.setdefault(power, GradedPolynomial.zero(algebra.ext_registry))
            coeffs[power] = prev + piece
    out = {
        p: algebra.restrict(poly)
        for p, poly in coeffs.items()
        if not poly.is_zero()
    }
    return HbarSeries(
        algebra.registry, out, 0, op.series.max_order, op.series.truncated
    )


def star(
    f: GradedPolynomial, g: GradedPolynomial, algebra: StarAlgebra
) -> HbarSeries:
    """Standard-ordered star product, truncated at the algebra order."""
    return symbol(
        operator_compose(
            quantize_standard_order(f, algebra),
            quantize_standard_order(g, algebra),
        )
    )


def star_series(a: HbarSeries, b: HbarSeries, algebra: StarAlgebra) -> HbarSeries:
    """Star product extended order-wise to hbar series."""
    out = HbarSeries.zero(algebra.registry, min(a.min_order, 0), algebra.max_order)
    truncated = a.truncated or b.truncated
    for pa, fa in a.coefficients.items():
        for pb, fb in b.coefficients.items():
            if pa + pb > algebra.max_order:
                truncated = True
                continue
            piece = star(fa, fb, algebra).shift(pa + pb)
            out = out + piece.rewindow(out.min_order, out.max_order)
    if truncated and not out.truncated:
        out = HbarSeries(
            out.registry, dict(out.coefficients), out.min_order, out.max_order, True
        )
    return out


def bidifferential_term(
    f: GradedPolynomial, g: GradedPolynomial, algebra: StarAlgebra, order: int
) -> GradedPolynomial:
    """B_k(f, g): the hbar^k coefficient of the star product."""
    return star(f, g, algebra).coefficient(order)


def star_associativity_residual(
    f: GradedPolynomial,
    g: GradedPolynomial,
    h: GradedPolynomial,
    algebra: StarAlgebra,
) -> HbarSeries:
    """(f * g) * h - f * (g * h); identically zero by construction."""
    h_series = HbarSeries.from_poly(h, 0, 0, algebra.max_order)
    f_series = HbarSeries.from_poly(f, 0, 0, algebra.max_order)
    left = star_series(star(f, g, algebra), h_series, algebra)
    right = star_series(f_series, star(g, h, algebra), algebra)
    return left - right


def graded_star_commutator(
    f: GradedPolynomial, g: GradedPolynomial, algebra: StarAlgebra
) -> HbarSeries:
    sign = (-1) ** (f.parity() * g.parity())
    return star(f, g, algebra) - star(g, f, algebra).scale(sign)


# -- boundary quantum master equation ------------------------------------


@dataclass
class BoundaryQMESolution:
    corrections: list[GradedPolynomial]
    obstruction: ObstructionCertificate | None = None
    obstruction_order: int | None = None

    @property
    def solved(self):
        return self.obstruction is None


def boundary_qme_residual(
    corrections: list[GradedPolynomial], algebra: StarAlgebra
) -> HbarSeries:
    """S_h * S_h for S_h = sum hbar^k corrections[k]."""
    S = HbarSeries(
        algebra.registry,
        {k: p for k, p in enumerate(corrections)},
        0,
        algebra.max_order,
    )
    return star_series(S, S, algebra)


def boundary_qme_solve(
    S0: GradedPolynomial, algebra: StarAlgebra, order: int, engine
) -> BoundaryQMESolution:
    """Deform S0 order by order so that S_h * S_h = 0 through hbar^order.

    The order-k residual of the partial sum is Q-closed exactly (a
    consequence of star associativity); the unknown correction S_(k-1)
    enters through {S0, S_(k-1)}, so each step is one exactness solve for
    the boundary differential.  A non-exact residual is the ghost-2
    obstruction class.
    """
    omega = algebra.polarization.omega
    classical = bracket(S0, S0, omega)
    if not classical.is_zero():
        raise ClassicalMasterFailure(
            "boundary action fails the classical master equation"
        )
    corrections = [S0]
    for k in range(2, order + 1):
        residual = boundary_qme_residual(corrections, algebra)
        rho = residual.coefficient(k)
        if rho.is_zero():
            corrections.append(GradedPolynomial.zero(algebra.registry))
            continue
        closedness = bracket(S0, rho, omega, check=False)
        if not closedness.is_zero():
            raise ClosednessFailure(
                f"order-{k} boundary residual is not Q-closed"
            )
        target = -rho
        result = engine.solve(target, context=f"boundary qme order {k}")
        if isinstance(result, ObstructionCertificate):
            return BoundaryQMESolution(corrections[1:], result, k)
        corrections.append(result)
        check = boundary_qme_residual(corrections, algebra).coefficient(k)
        if not check.is_zero():
            raise ClosednessFailure(
                f"order-{k} correction failed to cancel the residual"
            )
    return BoundaryQMESolution(corrections[1:])


# -- exponential states ---------------------------------------------------


@dataclass
class ExponentialState:
    """prefactor * torsion * exp(S / hbar) with S even of ghost 0.

    The phase polynomial is fixed; derivatives, polynomial multiplication,
    BV Laplacians and differential operators all act on the prefactor
    series (Laurent window bounded below by its min_order).
    """

    registry: GeneratorRegistry
    phase: GradedPolynomial
    prefactor: HbarSeries
    torsion: Fraction = Fraction(1)

    def __post_init__(self):
        if not self.phase.is_zero():
            if self.phase.ghost_numbers() != {0}:
                raise ValueError("state phase must be ghost 0")

    @classmethod
    def pure(cls, phase: GradedPolynomial, torsion=1, min_order=-2, max_order=4):
        one = HbarSeries.constant(phase.registry, 1, min_order, max_order)
        return cls(phase.registry, phase, one, Fraction(torsion))

    def is_zero_prefactor(self) -> bool:
        return self.prefactor.is_zero()

    def with_prefactor(self, series: HbarSeries) -> "ExponentialState":
        return ExponentialState(self.registry, self.phase, series, self.torsion)

    def multiply(self, poly: GradedPolynomial) -> "ExponentialState":
        coeffs = {
            p: mul(poly, c) for p, c in self.prefactor.coefficients.items()
        }
        return self.with_prefactor(
            HbarSeries(
                self.registry,
                coeffs,
                self.prefactor.min_order,
                self.prefactor.max_order,
                self.prefactor.truncated,
            )
        )

    def derivative(self, gen) -> "ExponentialState":
        """Left derivative: d(P e^(S/h)) = (dP + (-1)^(|g||P|) P dS / h) e^(S/h)."""
        registry = self.registry
        idx = registry.by_name(gen).index if isinstance(gen, str) else gen.index
        g = registry[idx]
        dS = left_derivative(self.phase, g)
        out: dict[int, GradedPolynomial] = {}

        def add(power, poly):
            if poly.is_zero():
                return
            if power < self.prefactor.min_order:
                raise LaurentWindowExceeded(
                    f"derivative pushed order to {power}, below "
                    f"{self.prefactor.min_order}"
                )
            prev = out.get(power, GradedPolynomial.zero(registry))
            out[power] = prev + poly

        for power, poly in self.prefactor.coefficients.items():
            add(power, left_derivative(poly, g))
            if dS.is_zero():
                continue
            twisted = GradedPolynomial(
                registry,
                {
                    m: c * ((-1) ** (g.parity * m.parity(registry)))
                    for m, c in poly.terms.items()
                },
            )
            add(power - 1, mul(twisted, dS))
        return self.with_prefactor(
            HbarSeries(
                registry,
                out,
                self.prefactor.min_order,
                self.prefactor.max_order,
                self.prefactor.truncated,
            )
        )

    def apply_laplacian(self, delta: BVLaplacian) -> "ExponentialState":
        """Delta(P e^(S/h)) with the exact second-order expansion."""
        registry = self.registry
        omega = delta.source
        S = self.phase
        dS = laplacian(S, delta)
        ss = bracket(S, S, omega, check=False)
        out: dict[int, GradedPolynomial] = {}

        def add(power, poly):
            if poly.is_zero():
                return
            if power < self.prefactor.min_order:
                raise LaurentWindowExceeded(
                    f"Laplacian pushed order to {power}, below "
                    f"{self.prefactor.min_order}"
                )
            prev = out.get(power, GradedPolynomial.zero(registry))
            out[power] = prev + poly

        for power, poly in self.prefactor.coefficients.items():
            add(power, laplacian(poly, delta))
            for mono, coeff in poly.terms.items():
                sign = (-1) ** mono.parity(registry)
                m_poly = GradedPolynomial(registry, {mono: coeff * sign})
                if not dS.is_zero():
                    add(power - 1, mul(m_poly, dS))
                pm_bracket = bracket(
                    GradedPolynomial(registry, {mono: coeff * sign}),
                    S,
                    omega,
                    check=False,
                )
                add(power - 1, pm_bracket)
                if not ss.is_zero():
                    add(power - 2, mul(m_poly, ss).scale(Fraction(1, 2)))
        return self.with_prefactor(
            HbarSeries(
                registry,
                out,
                self.prefactor.min_order,
                self.prefactor.max_order,
                self.prefactor.truncated,
            )
        )

    def apply_operator(self, op: DifferentialOperator) -> "ExponentialState":
        """Apply a normal-ordered operator term by term."""
        algebra = op.algebra
        registry = self.registry
        total = HbarSeries.zero(
            registry, self.prefactor.min_order, self.prefactor.max_order
        )
        for power, poly in op.series.coefficients.items():
            for mono, coeff in poly.terms.items():
                coeff_part, word = _derivative_word(mono, algebra)
                state = self
                for d_idx in reversed(word):
                    base_idx = algebra.base_of_d[d_idx]
                    state = state.derivative(registry[base_idx])
                piece = state.multiply(
                    GradedPolynomial(registry, {coeff_part: coeff})
                )
                shifted = piece.prefactor.shift(power)
                total = total + shifted
        return self.with_prefactor(total)


@dataclass
class QuantizationData:
    """Everything mqme_check needs: the state and the two operators."""

    registry: GeneratorRegistry
    residual_omega: SymplecticStructure  # ghost -1 pairing of the z sector
    omega_hat: DifferentialOperator
    state: ExponentialState
    name: str = ""
    metadata: dict = field(default_factory=dict)


def mqme_check(data: QuantizationData) -> HbarSeries:
    """Prefactor of (hbar^2 Delta_V + Omega_hat) applied to the state."""
    delta = BVLaplacian(data.residual_omega)
    left = data.state.apply_laplacian(delta).prefactor.shift(2)
    right = data.state.apply_operator(data.omega_hat).prefactor
    return left + right
