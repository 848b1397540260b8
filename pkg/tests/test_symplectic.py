from fractions import Fraction

import pytest

from bvbfv.core import GradedPolynomial, mul, register_generators
from bvbfv.errors import OddPairingRequired, PairingIncomplete
from bvbfv.symplectic import (
    BVLaplacian,
    SymplecticStructure,
    bracket,
    check_symplectic,
    hamiltonian_vf,
    laplacian,
)

from conftest import random_homogeneous, random_polynomial


def random_pairing(rng, ghost_w, npairs, weights=True):
    specs = []
    pair_specs = []
    for i in range(npairs):
        gu = rng.randint(-2, 2)
        gv = ghost_w - gu
        specs.append((f"u{i}", gu))
        specs.append((f"v{i}", gv))
        weight = Fraction(rng.choice([1, 1, 1, 2, -1, 3]), rng.choice([1, 1, 2]))
        pair_specs.append((f"u{i}", f"v{i}", weight if weights else 1))
    registry = register_generators(specs)
    return registry, SymplecticStructure.from_names(registry, pair_specs, ghost_w)


class TestStructure:
    def test_bv_field_content_passes(self):
        # gh: A:0/A+:-1, B:0/B+:-1, c:1/c+:-2 all sum to -1
        reg = register_generators(
            [("A", 0), ("Ap", -1), ("B", 0), ("Bp", -1), ("c", 1), ("cp", -2)]
        )
        omega = SymplecticStructure.from_names(
            reg, [("A", "Ap", 1), ("B", "Bp", 1), ("c", "cp", 1)], -1
        )
        assert check_symplectic(omega) == []

    def test_ghost_sum_violation(self):
        reg = register_generators([("c", 1), ("cp", -1)])
        omega = SymplecticStructure.from_names(reg, [("c", "cp", 1)], -1)
        violations = check_symplectic(omega)
        assert any("ghost sum" in v for v in violations)

    def test_empty_structure(self):
        reg = register_generators([])
        omega = SymplecticStructure(reg, (), -1)
        assert check_symplectic(omega) == []

    def test_unpaired_reported(self):
        reg = register_generators([("x", 0), ("xp", -1), ("loose", 2)])
        omega = SymplecticStructure.from_names(reg, [("x", "xp", 1)], -1)
        assert any("unpaired" in v for v in check_symplectic(omega))


class TestBracketAnchors:
    def test_darboux_normalization(self):
        reg = register_generators([("x", 0), ("xp", -1)])
        omega = SymplecticStructure.from_names(reg, [("x", "xp", 1)], -1)
        x = GradedPolynomial.generator(reg, "x")
        xp = GradedPolynomial.generator(reg, "xp")
        assert bracket(x, xp, omega) == GradedPolynomial.constant(reg, 1)
        assert bracket(x, x, omega).is_zero()

    def test_even_pair_antisymmetry(self):
        # BFV pair (b gh 0, p gh 0, s=1): {p, b} = -{b, p} = -1
        reg = register_generators([("b", 0), ("p", 0)])
        omega = SymplecticStructure.from_names(reg, [("b", "p", 1)], 0)
        b = GradedPolynomial.generator(reg, "b")
        p = GradedPolynomial.generator(reg, "p")
        assert bracket(b, p, omega) == GradedPolynomial.constant(reg, 1)
        assert bracket(p, b, omega) == GradedPolynomial.constant(reg, -1)

    def test_unpaired_raises(self):
        reg = register_generators([("x", 0), ("xp", -1), ("loose", 0)])
        omega = SymplecticStructure.from_names(reg, [("x", "xp", 1)], -1)
        loose = GradedPolynomial.generator(reg, "loose")
        x = GradedPolynomial.generator(reg, "x")
        with pytest.raises(PairingIncomplete):
            bracket(loose, x, omega)

    @pytest.mark.parametrize("ghost_w", [-1, 0, 1, -3])
    def test_shifted_antisymmetry(self, rng, ghost_w):
        n = -ghost_w
        for _ in range(120):
            registry, omega = random_pairing(rng, ghost_w, rng.randint(1, 4))
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=3)
            sign = -((-1) ** ((f.ghost() + n) * (g.ghost() + n)))
            assert bracket(f, g, omega) == bracket(g, f, omega).scale(sign)

    @pytest.mark.parametrize("ghost_w", [-1, 0, 1])
    def test_bracket_ghost(self, rng, ghost_w):
        for _ in range(80):
            registry, omega = random_pairing(rng, ghost_w, rng.randint(1, 4))
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=3)
            result = bracket(f, g, omega)
            if not result.is_zero():
                assert result.ghost() == f.ghost() + g.ghost() - ghost_w

    @pytest.mark.parametrize("ghost_w", [-1, 0, 1])
    def test_graded_leibniz(self, rng, ghost_w):
        for _ in range(150):
            registry, omega = random_pairing(rng, ghost_w, rng.randint(1, 3))
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=2)
            h = random_polynomial(rng, registry, max_degree=2)
            lhs = bracket(f, mul(g, h), omega)
            sign = (-1) ** ((f.ghost() - ghost_w) * g.ghost())
            rhs = mul(bracket(f, g, omega), h) + mul(
                g, bracket(f, h, omega)
            ).scale(sign)
            assert lhs == rhs

    @pytest.mark.parametrize("ghost_w", [-1, 0, 1])
    def test_graded_jacobi(self, rng, ghost_w):
        # Leibniz form: (f,(g,h)) = ((f,g),h) + (-1)^((f+n)(g+n)) (g,(f,h))
        n = -ghost_w
        for _ in range(150):
            registry, omega = random_pairing(rng, ghost_w, rng.randint(1, 3))
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=3)
            h = random_homogeneous(rng, registry, max_degree=3)
            lhs = bracket(f, bracket(g, h, omega), omega)
            sign = (-1) ** ((f.ghost() + n) * (g.ghost() + n))
            rhs = bracket(bracket(f, g, omega), h, omega) + bracket(
                g, bracket(f, h, omega), omega
            ).scale(sign)
            assert lhs == rhs


class TestLaplacian:
    def make_bv(self):
        reg = register_generators([("x", 0), ("xp", -1)])
        omega = SymplecticStructure.from_names(reg, [("x", "xp", 1)], -1)
        return reg, omega, BVLaplacian(omega)

    def test_pair_contraction(self):
        # normalization fixed by the Leibniz link: Delta(x xp) = (x, xp) = +1
        reg, omega, delta = self.make_bv()
        x = GradedPolynomial.generator(reg, "x")
        xp = GradedPolynomial.generator(reg, "xp")
        assert laplacian(mul(x, xp), delta) == GradedPolynomial.constant(reg, 1)

    def test_quadratic(self):
        reg, omega, delta = self.make_bv()
        x = GradedPolynomial.generator(reg, "x")
        xp = GradedPolynomial.generator(reg, "xp")
        assert laplacian(mul(mul(x, x), xp), delta) == x.scale(2)

    def test_constant(self):
        reg, omega, delta = self.make_bv()
        assert laplacian(GradedPolynomial.constant(reg, 5), delta).is_zero()

    def test_even_pairing_rejected(self):
        reg = register_generators([("b", 0), ("p", 0)])
        omega = SymplecticStructure.from_names(reg, [("b", "p", 1)], 0)
        with pytest.raises(OddPairingRequired):
            BVLaplacian(omega)

    def test_ghost_shift(self, rng):
        registry, omega = random_pairing(rng, -1, 3)
        delta = BVLaplacian(omega)
        for _ in range(60):
            f = random_homogeneous(rng, registry, max_degree=4)
            df = laplacian(f, delta)
            if not df.is_zero():
                assert df.ghost() == f.ghost() + 1

    @pytest.mark.parametrize("ghost_w", [-1, 1, -3])
    def test_delta_squared_zero(self, rng, ghost_w):
        for _ in range(150):
            registry, omega = random_pairing(rng, ghost_w, rng.randint(1, 8))
            delta = BVLaplacian(omega)
            f = random_polynomial(rng, registry, max_degree=4, terms=4)
            assert laplacian(laplacian(f, delta), delta).is_zero()

    def test_bv_leibniz_link(self, rng):
        # Delta(fg) = Delta(f) g + (-1)^f f Delta(g) + (-1)^f (f, g)
        for _ in range(200):
            registry, omega = random_pairing(rng, -1, rng.randint(1, 4))
            delta = BVLaplacian(omega)
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=3)
            sign = (-1) ** f.parity()
            lhs = laplacian(mul(f, g), delta)
            rhs = (
                mul(laplacian(f, delta), g)
                + mul(f, laplacian(g, delta)).scale(sign)
                + bracket(f, g, omega).scale(sign)
            )
            assert lhs == rhs

    def test_delta_bracket_identity(self, rng):
        # Delta is a graded derivation of the bracket.  The form below is
        # the one forced by the Leibniz link together with Delta^2 = 0:
        #   Delta(f,g) = (Delta f, g) - (-1)^(gh f) (f, Delta g)
        for _ in range(200):
            registry, omega = random_pairing(rng, -1, rng.randint(1, 4))
            delta = BVLaplacian(omega)
            f = random_homogeneous(rng, registry, max_degree=3)
            g = random_homogeneous(rng, registry, max_degree=3)
            lhs = laplacian(bracket(f, g, omega), delta)
            rhs = bracket(laplacian(f, delta), g, omega) - bracket(
                f, laplacian(g, delta), omega
            ).scale((-1) ** f.ghost())
            assert lhs == rhs

    def test_delta_of_cme_action_is_closed(self, rng):
        """The content of the Delta-bracket identity as used for the
        obstruction theory: (S,S) = 0 implies Q(Delta S) = 0."""
        reg = register_generators([("x", 0), ("xp", -1), ("c", 1), ("cp", -2)])
        omega = SymplecticStructure.from_names(
            reg, [("x", "xp", 1), ("c", "cp", 1)], -1
        )
        delta = BVLaplacian(omega)
        c = GradedPolynomial.generator(reg, "c")
        x = GradedPolynomial.generator(reg, "x")
        xp = GradedPolynomial.generator(reg, "xp")
        for power in range(1, 4):
            S = mul(c, xp)
            for _ in range(power):
                S = mul(S, x)
            assert bracket(S, S, omega).is_zero()
            dS = laplacian(S, delta)
            assert not dS.is_zero()
            assert bracket(S, dS, omega).is_zero()

    def test_scaling_invariance(self, rng):
        """Rescaling (u, v, s) -> (u, lam v, lam s) leaves bracket and
        Laplacian outputs unchanged once inputs are re-expressed."""
        lam = Fraction(3, 2)
        reg = register_generators([("x", 0), ("xp", -1), ("c", 1), ("cp", -2)])
        omega1 = SymplecticStructure.from_names(
            reg, [("x", "xp", 1), ("c", "cp", 2)], -1
        )
        omega2 = SymplecticStructure.from_names(
            reg, [("x", "xp", lam), ("c", "cp", 2)], -1
        )
        delta1, delta2 = BVLaplacian(omega1), BVLaplacian(omega2)

        def rescale(poly):
            # new coordinate xp' = lam * xp, i.e. substitute xp -> xp/lam
            out = GradedPolynomial.zero(reg)
            for mono, coeff in poly.terms.items():
                e = mono.exponent(reg.by_name("xp").index)
                out = out + GradedPolynomial(reg, {mono: coeff / lam**e})
            return out

        for _ in range(100):
            f = random_homogeneous(rng, reg, max_degree=3)
            g = random_homogeneous(rng, reg, max_degree=3)
            assert rescale(bracket(f, g, omega1)) == bracket(
                rescale(f), rescale(g), omega2
            )
            assert rescale(laplacian(f, delta1)) == laplacian(rescale(f), delta2)


class TestHamiltonianVF:
    def test_zero_action(self):
        reg = register_generators([("x", 0), ("xp", -1)])
        omega = SymplecticStructure.from_names(reg, [("x", "xp", 1)], -1)
        table = hamiltonian_vf(GradedPolynomial.zero(reg), omega)
        assert all(poly.is_zero() for _, poly in table.items())

    def test_degree_plus_one(self, rng):
        registry, omega = random_pairing(rng, -1, 3)
        for _ in range(40):
            S = random_homogeneous(rng, registry, max_degree=3)
            if S.ghost() != 0:
                continue
            table = hamiltonian_vf(S, omega)
            for idx, poly in table.items():
                if not poly.is_zero():
                    assert poly.ghost() == registry.ghost(idx) + 1

    def test_cme_implies_nilpotence(self, rng):
        """If (S,S) = 0 then Q^2 = 0 on every generator."""
        reg = register_generators([("x", 0), ("xp", -1), ("c", 1), ("cp", -2)])
        omega = SymplecticStructure.from_names(
            reg, [("x", "xp", 1), ("c", "cp", 1)], -1
        )
        c = GradedPolynomial.generator(reg, "c")
        x = GradedPolynomial.generator(reg, "x")
        xp = GradedPolynomial.generator(reg, "xp")
        S = mul(mul(c, mul(x, x)), xp)  # CME holds (c^2 = 0 kills (S,S))
        assert bracket(S, S, omega).is_zero()
        for gen in reg:
            gen_poly = GradedPolynomial.generator(reg, gen.name)
            q2 = bracket(S, bracket(S, gen_poly, omega), omega)
            assert q2.is_zero()
