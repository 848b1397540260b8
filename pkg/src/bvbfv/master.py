"""Master equation checkers and the order-by-order quantum solver.

The quantum master equation is handled mechanically: the residual of
(S_h, S_h) + 2 hbar Delta S_h is expanded as an hbar series and each
order is solved by an exactness query against the cohomology engine.
The hand-derived order-1/2 equations exist only in the tests, as a check
that the mechanical expansion reproduces them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .cohomology import (
    CohomologyResult,
    ExactnessSystem,
    ObstructionCertificate,
    TruncatedComplex,
    build_complex,
    cohomology_dim,
    solve_exactness,
)
from .core import GeneratorRegistry, GradedPolynomial, HbarSeries, mul
from .errors import (
    ClassicalMasterFailure,
    ClosednessFailure,
    GhostDegreeMismatch,
    MissingBoundaryData,
    NotASplitting,
    PairingIncomplete,
)
from .symplectic import (
    BVLaplacian,
    SymplecticStructure,
    VectorFieldTable,
    bracket,
    hamiltonian_vf,
    laplacian,
)


@dataclass
class BoundaryData:
    """Boundary attachment of a bulk theory.

    pi maps bulk generator indices to boundary generator indices (or None
    for generators that restrict to zero).  alpha stores the primitive
    one-form of the boundary symplectic structure in Darboux shape, as
    terms (coefficient, x index, y index) meaning  c * x * delta(y)  over
    the boundary registry.
    """

    pi: dict[int, int | None]
    alpha: tuple[tuple[Fraction, int, int], ...]
    boundary_theory: "TheoryInstance"

    def surjective(self, bulk_registry: GeneratorRegistry) -> bool:
        targets = {v for v in self.pi.values() if v is not None}
        return targets == {g.index for g in self.boundary_theory.registry}


@dataclass
class TheoryInstance:
    registry: GeneratorRegistry
    omega: SymplecticStructure
    action: GradedPolynomial
    boundary: BoundaryData | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def q_table(self) -> VectorFieldTable:
        return hamiltonian_vf(self.action, self.omega)

    def differential(self):
        """Q = bracket(S, -) as a callable (the cochain differential)."""
        return lambda f: bracket(self.action, f, self.omega, check=False)

    def validate(self) -> list[str]:
        problems = []
        expected = self.omega.ghost_w + 1
        if not self.action.is_zero():
            if not self.action.is_ghost_homogeneous():
                problems.append("action is not ghost homogeneous")
            elif self.action.ghost() != expected:
                problems.append(
                    f"action ghost {self.action.ghost()} != ghost_w + 1 = {expected}"
                )
        if self.boundary is not None and not self.boundary.surjective(self.registry):
            problems.append("pi is not surjective onto the boundary registry")
        return problems


def substitution_map(
    source: GeneratorRegistry,
    target: GeneratorRegistry,
    images: dict[int, GradedPolynomial],
):
    """Algebra morphism determined by generator images (ghost preserving)."""

    def apply(f: GradedPolynomial) -> GradedPolynomial:
        out = GradedPolynomial.zero(target)
        for mono, coeff in f.terms.items():
            term = GradedPolynomial.constant(target, coeff)
            for idx, exp in mono.factors:
                image = images.get(idx)
                if image is None:
                    term = GradedPolynomial.zero(target)
                    break
                for _ in range(exp):
                    term = mul(term, image)
                if term.is_zero():
                    break
            out = out + term
        return out

    return apply


def pullback(data: BoundaryData, bulk_registry: GeneratorRegistry):
    """pi^*: boundary polynomials -> bulk polynomials.

    The boundary coordinate y pulls back to the sum of its pi-preimages.
    """
    boundary_registry = data.boundary_theory.registry
    images: dict[int, GradedPolynomial] = {}
    for bulk_idx, bdry_idx in data.pi.items():
        if bdry_idx is None:
            continue
        image = images.get(bdry_idx, GradedPolynomial.zero(bulk_registry))
        images[bdry_idx] = image + GradedPolynomial.generator(bulk_registry, bulk_idx)
    for gen in boundary_registry:
        images.setdefault(gen.index, GradedPolynomial.zero(bulk_registry))
    return substitution_map(boundary_registry, bulk_registry, images)


def cme_check(t: TheoryInstance) -> GradedPolynomial:
    """Residual of the classical master equation, bracket(S, S)."""
    return bracket(t.action, t.action, t.omega)


def contract_alpha(
    alpha, q_table: VectorFieldTable, registry: GeneratorRegistry
) -> GradedPolynomial:
    """iota_Q alpha for alpha = sum c * x * delta(y):  sum c * x * Q(y)."""
    out = GradedPolynomial.zero(registry)
    for coeff, x_idx, y_idx in alpha:
        qy = q_table(y_idx)
        if qy.is_zero():
            continue
        x_poly = GradedPolynomial.generator(registry, x_idx)
        out = out + mul(x_poly, qy).scale(coeff)
    return out


def boundary_correction(t: TheoryInstance) -> GradedPolynomial:
    """pi^*(2 S_boundary - iota_{Q_boundary} alpha) in the bulk algebra."""
    if t.boundary is None:
        raise MissingBoundaryData("theory has no boundary data")
    bdata = t.boundary
    bt = bdata.boundary_theory
    q_bdry = hamiltonian_vf(bt.action, bt.omega)
    corr = bt.action.scale(2) - contract_alpha(bdata.alpha, q_bdry, bt.registry)
    return pullback(bdata, t.registry)(corr)


def mcme_check(t: TheoryInstance) -> GradedPolynomial:
    """Residual of the modified classical master equation."""
    if t.boundary is None:
        return cme_check(t)
    return cme_check(t) - boundary_correction(t)


@dataclass
class SplitReport:
    y_part_ok: bool
    b_part_ok: bool
    y_part2_ok: bool
    y_part_residuals: dict[str, GradedPolynomial]
    b_part_residuals: dict[str, GradedPolynomial]
    y_part2_residual: GradedPolynomial

    @property
    def all_ok(self) -> bool:
        return self.y_part_ok and self.b_part_ok and self.y_part2_ok


def mcme_split_check(t: TheoryInstance, b_names) -> SplitReport:
    """Verify the three splitting identities of the boundary construction.

    `b_names` selects the leaf-part generators; every Darboux pair must
    lie wholly inside or outside it.  The identities checked:

      (Y part)   the alpha correction has no components along Y generators,
      (B part)   the left derivative of S along each B generator equals
                 minus the matching component of pi^* alpha,
      (Y part 2) half the bracket of S with itself contracted over the Y
                 pairs only equals pi^*(S_boundary).
    """
    if t.boundary is None:
        raise MissingBoundaryData("split check needs boundary data")
    registry = t.registry
    b_set = {
        registry.by_name(n).index if isinstance(n, str) else n for n in b_names
    }
    y_pair_positions = []
    for pos, (u, v, _) in enumerate(t.omega.pairs):
        in_b = (u in b_set) + (v in b_set)
        if in_b == 1:
            raise NotASplitting(
                f"pair ({registry[u].name}, {registry[v].name}) straddles the partition"
            )
        if in_b == 0:
            y_pair_positions.append(pos)

    from .core import left_derivative

    pull = pullback(t.boundary, registry)
    bdry = t.boundary.boundary_theory
    # component of pi^* alpha along each bulk generator: terms c x delta(y)
    # contribute c * pi^*(x) to every pi-preimage of y
    alpha_components: dict[int, GradedPolynomial] = {}
    for coeff, x_idx, y_idx in t.boundary.alpha:
        x_pull = pull(GradedPolynomial.generator(bdry.registry, x_idx))
        for bulk_idx, target in t.boundary.pi.items():
            if target == y_idx:
                prev = alpha_components.get(
                    bulk_idx, GradedPolynomial.zero(registry)
                )
                alpha_components[bulk_idx] = prev + x_pull.scale(coeff)

    y_res: dict[str, GradedPolynomial] = {}
    b_res: dict[str, GradedPolynomial] = {}
    for gen in registry:
        comp = alpha_components.get(gen.index, GradedPolynomial.zero(registry))
        if gen.index in b_set:
            residual = left_derivative(t.action, gen) + comp
            if not residual.is_zero():
                b_res[gen.name] = residual
        else:
            if not comp.is_zero():
                y_res[gen.name] = comp
    omega_y = t.omega.sub_structure(y_pair_positions)
    ss_y = bracket(t.action, t.action, omega_y, check=False)
    y2_residual = ss_y.scale(Fraction(1, 2)) - pull(bdry.action)
    return SplitReport(
        y_part_ok=not y_res,
        b_part_ok=not b_res,
        y_part2_ok=y2_residual.is_zero(),
        y_part_residuals=y_res,
        b_part_residuals=b_res,
        y_part2_residual=y2_residual,
    )


def higher_mcme_check(tower: list[TheoryInstance]) -> list[GradedPolynomial]:
    """mcme residual at every link of a codimension tower."""
    if len(tower) < 2:
        raise MissingBoundaryData("a tower needs at least two levels")
    residuals = []
    for level, t in enumerate(tower[:-1]):
        nxt = tower[level + 1]
        if t.boundary is None or t.boundary.boundary_theory is not nxt:
            raise MissingBoundaryData(
                f"tower level {level} is not linked to level {level + 1}"
            )
        if nxt.omega.ghost_w != t.omega.ghost_w + 1:
            raise GhostDegreeMismatch(
                f"ghost_w must step by +1: level {level} has {t.omega.ghost_w}, "
                f"level {level + 1} has {nxt.omega.ghost_w}"
            )
        residuals.append(mcme_check(t))
    return residuals


def higher_qme_classical_check(t: TheoryInstance) -> GradedPolynomial:
    """Classical shadow of the higher quantum master equation."""
    return bracket(t.action, t.action, t.omega)


# -- quantum solver -----------------------------------------------------


class CohomologyEngine:
    """Window cache around build_complex for one differential."""

    def __init__(
        self,
        registry: GeneratorRegistry,
        differential,
        max_degree: int,
        filtered: bool = False,
    ):
        self.registry = registry
        self.differential = differential
        self.max_degree = max_degree
        self.filtered = filtered
        self._complexes: dict[tuple[int, int], TruncatedComplex] = {}
        self._systems: dict[int, ExactnessSystem] = {}

    def complex_for(self, g_min: int, g_max: int) -> TruncatedComplex:
        key = (g_min, g_max)
        if key not in self._complexes:
            self._complexes[key] = build_complex(
                self.differential,
                self.registry,
                g_min,
                g_max,
                self.max_degree,
                self.filtered,
            )
        return self._complexes[key]

    def system_for(self, ghost: int) -> ExactnessSystem:
        if ghost not in self._systems:
            self._systems[ghost] = ExactnessSystem(
                self.registry, self.differential, ghost, self.max_degree
            )
        return self._systems[ghost]

    def solve(self, target: GradedPolynomial, context: str = ""):
        """Exactness solve with the witness capped at max_degree.

        The expansion of images is exact (uncapped), so certificates mean
        "no witness of polynomial degree <= max_degree exists".
        """
        g = target.ghost()
        return self.system_for(g).solve(target, context)

    def verify(self, cert: ObstructionCertificate) -> bool:
        return self.system_for(cert.ghost).verify(cert)

    def cohomology(self, g: int) -> CohomologyResult:
        return cohomology_dim(self.complex_for(g - 1, g + 1), g)

    @classmethod
    def for_theory(cls, t: TheoryInstance, max_degree: int, filtered=False):
        return cls(t.registry, t.differential(), max_degree, filtered)


@dataclass
class QMESolution:
    corrections: list[GradedPolynomial]
    obstruction: ObstructionCertificate | None = None
    obstruction_order: int | None = None

    @property
    def solved(self) -> bool:
        return self.obstruction is None


def bracket_series(
    a: HbarSeries, b: HbarSeries, omega: SymplecticStructure
) -> HbarSeries:
    """Order-wise bracket of two hbar series (Cauchy style)."""
    coeffs: dict[int, GradedPolynomial] = {}
    truncated = a.truncated or b.truncated
    for pa, fa in a.coefficients.items():
        for pb, fb in b.coefficients.items():
            p = pa + pb
            if p > a.max_order:
                truncated = True
                continue
            value = bracket(fa, fb, omega, check=False)
            if value.is_zero():
                continue
            prev = coeffs.get(p)
            coeffs[p] = value if prev is None else prev + value
    return HbarSeries(a.registry, coeffs, a.min_order, a.max_order, truncated)


def qme_residual(
    corrections: list[GradedPolynomial],
    omega: SymplecticStructure,
    delta: BVLaplacian,
    order: int,
) -> HbarSeries:
    """(S_h, S_h) + 2 hbar Delta S_h through hbar^order."""
    registry = omega.registry
    S = HbarSeries(
        registry,
        {k: poly for k, poly in enumerate(corrections)},
        0,
        order,
    )
    residual = bracket_series(S, S, omega)
    delta_terms = {
        k + 1: laplacian(poly, delta).scale(2)
        for k, poly in enumerate(corrections)
        if k + 1 <= order
    }
    return residual + HbarSeries(registry, delta_terms, 0, order)


def qme_solve(
    t: TheoryInstance,
    delta: BVLaplacian,
    order: int,
    engine: CohomologyEngine,
) -> QMESolution:
    """Solve the quantum master equation order by order in hbar.

    At order k the residual of the partial solution is assembled
    mechanically; the equation for the unknown S_k is
    2 Q(S_k) + residual_k = 0, so the exactness target is -residual_k / 2.
    A non-exact target is returned as an obstruction certificate (the
    class of the order-k residual in ghost-1 cohomology).
    """
    if not cme_check(t).is_zero():
        raise ClassicalMasterFailure("classical master equation fails at order 0")
    corrections: list[GradedPolynomial] = [t.action]
    for k in range(1, order + 1):
        partial = qme_residual(corrections, t.omega, delta, order)
        rho = partial.coefficient(k)
        if rho.is_zero():
            corrections.append(GradedPolynomial.zero(t.registry))
            continue
        target = rho.scale(Fraction(-1, 2))
        closedness = bracket(t.action, target, t.omega, check=False)
        if not closedness.is_zero():
            raise ClosednessFailure(
                f"order-{k} right-hand side is not Q-closed (internal sign bug)"
            )
        result = engine.solve(target, context=f"qme order {k}")
        if isinstance(result, ObstructionCertificate):
            return QMESolution(corrections[1:], result, k)
        corrections.append(result)
    return QMESolution(corrections[1:])
