from fractions import Fraction

import pytest

from gibbslab.maps import BranchSpec, PartitionSpec, build_map, doubling_map


def three_symbol_map():
    """Tripling-like map on thirds whose last branch only reaches {0, 1}.

    Branch 2 has slope 2 so its affine image is exactly [0, 2/3]; the
    admissibility matrix forbids the 2 -> 2 transition.
    """
    part = PartitionSpec((Fraction(0), Fraction(1, 3), Fraction(2, 3), Fraction(1)))
    return build_map(part, [
        BranchSpec(Fraction(3), Fraction(0), frozenset({0, 1, 2})),
        BranchSpec(Fraction(3), Fraction(-1), frozenset({0, 1, 2})),
        BranchSpec(Fraction(2), Fraction(-4, 3), frozenset({0, 1})),
    ])


def tent_map():
    """Orientation-reversing second branch; full shift on 2 symbols."""
    part = PartitionSpec((Fraction(0), Fraction(1, 2), Fraction(1)))
    return build_map(part, [
        BranchSpec(Fraction(2), Fraction(0), frozenset({0, 1})),
        BranchSpec(Fraction(-2), Fraction(2), frozenset({0, 1})),
    ])


@pytest.fixture
def doubling():
    return doubling_map()


@pytest.fixture
def three_symbol():
    return three_symbol_map()


@pytest.fixture
def tent():
    return tent_map()
