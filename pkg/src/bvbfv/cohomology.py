"""Exact Q-cohomology on ghost/degree truncations, with witnesses.

The complex is presented by the monomial bases of each ghost degree
(polynomial degree <= D, graded-lexicographic order) and the sparse
exact-rational matrices of Q between consecutive degrees.  Ranks, kernels
and exactness solves all run over Fraction; there is no floating point
anywhere, so an obstruction verdict is a proof, not an estimate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .core import GeneratorRegistry, GradedPolynomial, Monomial
from .errors import NotClosed, TruncationUnsound
from .expressions import render

SparseMatrix = list[dict[int, Fraction]]  # per-column dict row -> value


def enumerate_monomials(
    registry: GeneratorRegistry, max_degree: int
) -> dict[int, list[Monomial]]:
    """All normal-form monomials of degree <= max_degree, keyed by ghost."""
    by_ghost: dict[int, list[Monomial]] = {}
    indices = range(len(registry))
    for degree in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(indices, degree):
            factors: list[tuple[int, int]] = []
            ok = True
            for idx in combo:
                if factors and factors[-1][0] == idx:
                    if registry.parity(idx):
                        ok = False
                        break
                    factors[-1] = (factors[-1][0], factors[-1][1] + 1)
                else:
                    factors.append((idx, 1))
            if not ok:
                continue
            mono = Monomial(tuple(factors))
            by_ghost.setdefault(mono.ghost(registry), []).append(mono)
    for monos in by_ghost.values():
        monos.sort(key=lambda m: m.sort_key())
    return by_ghost


@dataclass
class TruncatedComplex:
    registry: GeneratorRegistry
    differential: "object"  # callable GradedPolynomial -> GradedPolynomial
    ghost_window: tuple[int, int]
    poly_degree_cap: int
    bases: dict[int, list[Monomial]]
    index: dict[int, dict[Monomial, int]]
    matrices: dict[int, SparseMatrix]
    filtered: bool = False

    def basis(self, ghost: int) -> list[Monomial]:
        return self.bases.get(ghost, [])

    def matrix(self, ghost: int) -> SparseMatrix:
        return self.matrices.get(ghost, [])

    def to_vector(self, poly: GradedPolynomial, ghost: int) -> dict[int, Fraction]:
        lookup = self.index.get(ghost, {})
        vec: dict[int, Fraction] = {}
        for mono, coeff in poly.terms.items():
            if mono not in lookup:
                raise TruncationUnsound(
                    f"monomial {render(GradedPolynomial(self.registry, {mono: Fraction(1)}))} "
                    f"is outside the ghost-{ghost} basis",
                    witness=mono,
                )
            vec[lookup[mono]] = coeff
        return vec

    def from_vector(self, vec: dict[int, Fraction], ghost: int) -> GradedPolynomial:
        basis = self.basis(ghost)
        return GradedPolynomial(
            self.registry, {basis[i]: c for i, c in vec.items() if c}
        )


def build_complex(
    differential,
    registry: GeneratorRegistry,
    g_min: int,
    g_max: int,
    max_degree: int,
    filtered: bool = False,
) -> TruncatedComplex:
    """Materialize the matrices of Q on each ghost degree in the window.

    `differential` maps a GradedPolynomial to its image under Q (a ghost
    +1 derivation).  Without `filtered`, any basis monomial whose image
    leaves the degree-cap span raises TruncationUnsound; with it, such
    monomials are iteratively discarded so the remaining span is an honest
    sub-complex (results are then labeled as filtered).
    """
    all_bases = enumerate_monomials(registry, max_degree)
    bases: dict[int, list[Monomial]] = {
        g: list(all_bases.get(g, [])) for g in range(g_min, g_max + 1)
    }

    def image_ok(mono: Monomial, allowed: dict[int, set[Monomial]]):
        poly = differential(GradedPolynomial(registry, {mono: Fraction(1)}))
        target = allowed.get(mono.ghost(registry) + 1)
        for out_mono in poly.terms:
            if out_mono.degree > max_degree:
                return False, out_mono
            if target is not None and out_mono not in target:
                return False, out_mono
        return True, None

    if filtered:
        allowed = {g: set(monos) for g, monos in bases.items()}
        changed = True
        while changed:
            changed = False
            for g in range(g_min, g_max + 1):
                keep = []
                for mono in bases[g]:
                    ok, _ = image_ok(mono, allowed)
                    if ok:
                        keep.append(mono)
                    else:
                        changed = True
                if len(keep) != len(bases[g]):
                    bases[g] = keep
                    allowed[g] = set(keep)
    else:
        # soundness check: images must stay inside the degree-cap span
        for g in range(g_min, g_max + 1):
            for mono in bases[g]:
                poly = differential(GradedPolynomial(registry, {mono: Fraction(1)}))
                for out_mono in poly.terms:
                    if out_mono.degree > max_degree:
                        raise TruncationUnsound(
                            "differential leaves the degree-"
                            f"{max_degree} span on monomial "
                            f"{render(GradedPolynomial(registry, {mono: Fraction(1)}))}"
                            " (use the filtered mode or raise the cap)",
                            witness=mono,
                        )

    index = {g: {m: i for i, m in enumerate(monos)} for g, monos in bases.items()}
    matrices: dict[int, SparseMatrix] = {}
    for g in range(g_min, g_max):
        target_index = index.get(g + 1, {})
        columns: SparseMatrix = []
        for mono in bases[g]:
            poly = differential(GradedPolynomial(registry, {mono: Fraction(1)}))
            col: dict[int, Fraction] = {}
            for out_mono, coeff in poly.terms.items():
                row = target_index.get(out_mono)
                if row is None:
                    # can only happen in filtered mode for ghosts at the
                    # window edge; outside-window images are dropped there
                    if out_mono.ghost(registry) in bases:
                        raise TruncationUnsound(
                            "filtered sub-complex lost an image monomial",
                            witness=out_mono,
                        )
                    continue
                col[row] = coeff
            columns.append(col)
        matrices[g] = columns
    return TruncatedComplex(
        registry,
        differential,
        (g_min, g_max),
        max_degree,
        bases,
        index,
        matrices,
        filtered,
    )


# -- exact sparse elimination ------------------------------------------


class Elimination:
    """Incremental exact Gaussian elimination over Fraction.

    Columns are inserted one at a time; each reduced column either adds a
    new pivot or exposes a linear dependence, whose combination is returned.
    """

    def __init__(self):
        self.pivots: dict[int, dict[int, Fraction]] = {}  # pivot row -> column
        self.history: dict[int, dict[int, Fraction]] = {}  # pivot row -> combo
        self.rank = 0

    @staticmethod
    def _axpy(target, source, factor):
        for key, value in source.items():
            s = target.get(key, Fraction(0)) - factor * value
            if s:
                target[key] = s
            else:
                target.pop(key, None)

    def reduce(self, column: dict[int, Fraction], tag=None):
        """Reduce a column against the current pivots.

        Returns (residual, combo) where combo maps already-inserted tags to
        coefficients such that column = sum combo[t] * column_t + residual.
        """
        col = dict(column)
        combo: dict = {}
        while col:
            pivot_row = min(col)
            existing = self.pivots.get(pivot_row)
            if existing is None:
                break
            factor = col[pivot_row] / existing[pivot_row]
            self._axpy(col, existing, factor)
            for t, c in self.history[pivot_row].items():
                s = combo.get(t, Fraction(0)) + factor * c
                if s:
                    combo[t] = s
                else:
                    combo.pop(t, None)
        return col, combo

    def insert(self, column: dict[int, Fraction], tag):
        """Insert a column; returns None if independent, else the dependence
        combo expressing it through earlier tags."""
        col, combo = self.reduce(column)
        if not col:
            return combo
        pivot_row = min(col)
        record = dict(combo)
        record[tag] = Fraction(1)
        # history stores: column (reduced) = sum record[t] * original_t?  No:
        # reduced = original - sum combo * earlier  =>  original combination
        # giving the stored reduced column is  original_tag - combo.
        stored_combo = {tag: Fraction(1)}
        for t, c in combo.items():
            stored_combo[t] = stored_combo.get(t, Fraction(0)) - c
        self.pivots[pivot_row] = col
        self.history[pivot_row] = stored_combo
        self.rank += 1
        return None


def matrix_rank(columns: SparseMatrix) -> int:
    elim = Elimination()
    for j, col in enumerate(columns):
        elim.insert(col, j)
    return elim.rank


def kernel_basis(columns: SparseMatrix, dimension: int) -> list[dict[int, Fraction]]:
    """Vectors (as sparse dicts over column indices) spanning the kernel."""
    elim = Elimination()
    kernel = []
    for j in range(dimension):
        col = columns[j] if j < len(columns) else {}
        combo = elim.insert(col, j)
        if combo is not None:
            vec = {j: Fraction(1)}
            for t, c in combo.items():
                vec[t] = -c
            kernel.append(vec)
    return kernel


@dataclass
class ObstructionCertificate:
    """Q-closed element with an exact proof of non-exactness.

    The non-exactness claim is scoped to witnesses of polynomial degree at
    most `witness_degree_cap` (the declared window of the engine that
    produced it); the rank pair is the proof.
    """

    cocycle: GradedPolynomial
    ghost: int
    closedness_residual: GradedPolynomial
    image_rank: int
    extended_rank: int
    witness_degree_cap: int = 0
    context: str = ""

    @property
    def non_exact(self) -> bool:
        return self.extended_rank > self.image_rank

    def verify(self, context) -> bool:
        """Re-run both witnesses from stored data alone.

        `context` is anything exposing the differential and a witness
        basis: a TruncatedComplex or an ExactnessSystem.
        """
        if isinstance(context, TruncatedComplex):
            closed = context.differential(self.cocycle).is_zero()
            columns = context.matrix(self.ghost - 1)
            elim = Elimination()
            for j, col in enumerate(columns):
                elim.insert(col, j)
            image_rank = elim.rank
            residual, _ = elim.reduce(context.to_vector(self.cocycle, self.ghost))
            return (
                closed
                and image_rank == self.image_rank
                and bool(residual) == self.non_exact
            )
        return context.verify(self)


class ExactnessSystem:
    """Exactness solves at one ghost degree with a capped witness basis.

    The witness space is every monomial of ghost (g - 1) and polynomial
    degree <= max_degree; images and targets are expanded exactly over
    whatever monomials occur (the codomain carries no truncation, so a
    returned certificate proves there is no witness inside the window).
    """

    def __init__(self, registry, differential, ghost: int, max_degree: int):
        self.registry = registry
        self.differential = differential
        self.ghost = ghost
        self.max_degree = max_degree
        self.domain = enumerate_monomials(registry, max_degree).get(ghost - 1, [])
        self._rows: dict[Monomial, int] = {}
        self._elim = Elimination()
        for j, mono in enumerate(self.domain):
            image = differential(GradedPolynomial(registry, {mono: Fraction(1)}))
            self._elim.insert(self._vectorize(image), j)
        self.image_rank = self._elim.rank

    def _vectorize(self, poly: GradedPolynomial) -> dict[int, Fraction]:
        vec = {}
        for mono, coeff in poly.terms.items():
            row = self._rows.setdefault(mono, len(self._rows))
            vec[row] = coeff
        return vec

    def solve(self, target: GradedPolynomial, context: str = ""):
        closedness = self.differential(target)
        if not closedness.is_zero():
            raise NotClosed(
                f"target is not closed: Q(target) = {render(closedness)}"
            )
        ghosts = target.ghost_numbers()
        if ghosts and ghosts != {self.ghost}:
            raise ValueError(
                f"target has ghost {ghosts}, system solves at ghost {self.ghost}"
            )
        residual, combo = self._elim.reduce(self._vectorize(target))
        if residual:
            return ObstructionCertificate(
                cocycle=target,
                ghost=self.ghost,
                closedness_residual=closedness,
                image_rank=self.image_rank,
                extended_rank=self.image_rank + 1,
                witness_degree_cap=self.max_degree,
                context=context,
            )
        witness = GradedPolynomial(
            self.registry, {self.domain[j]: c for j, c in combo.items() if c}
        )
        return witness

    def verify(self, cert: ObstructionCertificate) -> bool:
        closed = self.differential(cert.cocycle).is_zero()
        residual, _ = self._elim.reduce(self._vectorize(cert.cocycle))
        return (
            closed
            and self.image_rank == cert.image_rank
            and bool(residual) == cert.non_exact
        )


@dataclass
class CohomologyResult:
    ghost: int
    dim_basis: int
    dim_kernel: int
    dim_image: int
    representatives: list[GradedPolynomial]
    filtered: bool = False

    @property
    def dim_cohomology(self) -> int:
        return self.dim_kernel - self.dim_image


def cohomology_dim(complex_: TruncatedComplex, ghost: int) -> CohomologyResult:
    """Exact kernel/image dimensions at one ghost degree with representatives."""
    g_min, g_max = complex_.ghost_window
    if not (g_min < ghost < g_max):
        raise ValueError(
            f"ghost {ghost} needs both neighbors inside the window ({g_min}, {g_max})"
        )
    basis = complex_.basis(ghost)
    out_columns = complex_.matrix(ghost)
    kernel = kernel_basis(out_columns, len(basis))
    in_columns = complex_.matrix(ghost - 1)
    elim = Elimination()
    for j, col in enumerate(in_columns):
        elim.insert(col, ("im", j))
    dim_image = elim.rank
    representatives = []
    for vec in kernel:
        if elim.insert(vec, ("ker", len(representatives))) is None:
            representatives.append(complex_.from_vector(vec, ghost))
    return CohomologyResult(
        ghost,
        len(basis),
        len(kernel),
        dim_image,
        representatives,
        complex_.filtered,
    )


def solve_exactness(
    complex_: TruncatedComplex, target: GradedPolynomial, context: str = ""
):
    """Find x with Q(x) = target, else an ObstructionCertificate.

    The witness is deterministic: the ghost-(g-1) basis is scanned in
    graded-lexicographic order and free coordinates are set to zero, so
    the reported solution is the greedy minimal-degree representative.
    """
    closedness = complex_.differential(target)
    if not closedness.is_zero():
        raise NotClosed(f"target is not closed: Q(target) = {render(closedness)}")
    ghosts = target.ghost_numbers()
    if len(ghosts) != 1:
        raise ValueError("target must be nonzero and ghost-homogeneous")
    g = ghosts.pop()
    columns = complex_.matrix(g - 1)
    elim = Elimination()
    for j, col in enumerate(columns):
        elim.insert(col, j)
    image_rank = elim.rank
    vec = complex_.to_vector(target, g)
    residual, combo = elim.reduce(vec)
    if residual:
        return ObstructionCertificate(
            cocycle=target,
            ghost=g,
            closedness_residual=closedness,
            image_rank=image_rank,
            extended_rank=image_rank + 1,
            context=context,
        )
    witness = complex_.from_vector(combo, g - 1)
    return witness
