import itertools
import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bvbfv.core import GradedPolynomial, Monomial, register_generators


def random_monomial(rng, registry, max_degree=4):
    degree = rng.randint(0, max_degree)
    factors = {}
    for _ in range(degree):
        idx = rng.randrange(len(registry))
        if registry.parity(idx) and idx in factors:
            continue
        factors[idx] = factors.get(idx, 0) + 1
    return Monomial(tuple(sorted(factors.items())))


def random_polynomial(rng, registry, max_degree=4, terms=3):
    poly = GradedPolynomial.zero(registry)
    for _ in range(terms):
        mono = random_monomial(rng, registry, max_degree)
        coeff = Fraction(rng.randint(-6, 6), rng.choice([1, 1, 2, 3]))
        poly = poly + GradedPolynomial(registry, {mono: coeff}) if coeff else poly
    return poly


def random_homogeneous(rng, registry, max_degree=4, terms=3, attempts=60):
    """Random nonzero ghost-homogeneous polynomial."""
    for _ in range(attempts):
        mono = random_monomial(rng, registry, max_degree)
        ghost = mono.ghost(registry)
        poly = GradedPolynomial(registry, {mono: Fraction(rng.randint(1, 4))})
        for _ in range(terms - 1):
            other = random_monomial(rng, registry, max_degree)
            if other.ghost(registry) == ghost:
                coeff = Fraction(rng.randint(-4, 4))
                if coeff:
                    poly = poly + GradedPolynomial(registry, {other: coeff})
        if not poly.is_zero():
            return poly
    raise AssertionError("could not build a homogeneous sample")


def all_monomials(registry, max_degree):
    """Every normal-form monomial of degree <= max_degree (exhaustive)."""
    indices = range(len(registry))
    out = [Monomial()]
    for degree in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(indices, degree):
            factors = []
            ok = True
            for idx in combo:
                if factors and factors[-1][0] == idx:
                    if registry.parity(idx):
                        ok = False
                        break
                    factors[-1] = (idx, factors[-1][1] + 1)
                else:
                    factors.append((idx, 1))
            if ok:
                out.append(Monomial(tuple(factors)))
    return out


@pytest.fixture
def rng():
    return random.Random(20240811)


@pytest.fixture
def mixed_registry():
    return register_generators(
        [("x", 0), ("xp", -1), ("c", 1), ("cp", -2), ("y", 2), ("yp", -3)]
    )
