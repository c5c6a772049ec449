import math
from fractions import Fraction

import pytest

from gibbslab.config import parse_map, parse_potential
from gibbslab.errors import ConfigError, NonExpanding

DOUBLING = """
# dyadic full shift
[partition]
endpoints = 0, 1/2, 1

[branch.0]
slope = 2
intercept = 0
images = 0, 1

[branch.1]
slope = 2
intercept = -1
images = 0, 1
"""

THREE = """
[partition]
endpoints = 0, 1/3, 2/3, 1
[branch.0]
slope = 3
intercept = 0
images = 0, 1, 2
[branch.1]
slope = 3
intercept = -1
images = 0, 1, 2
[branch.2]
slope = 2
intercept = -4/3
images = 0, 1
"""


def test_parse_doubling():
    m = parse_map(DOUBLING)
    assert m.Q == 2
    assert m.endpoints == (0, Fraction(1, 2), 1)
    assert m.primitivity_exponent == 1


def test_parse_three_symbol():
    m = parse_map(THREE)
    assert m.admissibility == ((1, 1, 1), (1, 1, 1), (1, 1, 0))


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_map(DOUBLING.replace("intercept = 0", "intercept = 0\nfoo = 1"))


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_map(DOUBLING + "\n[extra]\nx = 1\n")


def test_missing_branch_rejected():
    text = DOUBLING.replace("[branch.1]", "[branch.7]")
    with pytest.raises(ConfigError, match="branch"):
        parse_map(text)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_map(DOUBLING.replace("slope = 2", "slope = 2\nslope = 3", 1))


def test_semantic_errors_propagate():
    with pytest.raises(NonExpanding):
        parse_map(DOUBLING.replace("slope = 2", "slope = 1/2", 1)
                  .replace("images = 0, 1", "images = 0", 1))


def test_parse_potential_log_form():
    m = parse_map(DOUBLING)
    phi = parse_potential("""
[potential]
depth = 1
value.0 = log:7/10
value.1 = log:3/10
""", m)
    assert phi.depth == 1
    assert phi.values[(0,)] == pytest.approx(math.log(0.7), abs=1e-15)
    assert phi.values[(1,)] == pytest.approx(math.log(0.3), abs=1e-15)


def test_parse_potential_builtin():
    m = parse_map(DOUBLING)
    phi = parse_potential("[potential]\nbuiltin = neg-log-deriv\n", m)
    assert phi.builtin == "neg-log-deriv"
    assert phi.values[(0,)] == pytest.approx(-math.log(2))


def test_parse_potential_depth2_words():
    m = parse_map(DOUBLING)
    phi = parse_potential("""
[potential]
depth = 2
value.0-0 = -0.1
value.0-1 = -2.3
value.1-0 = -0.7
value.1-1 = -0.7
""", m)
    assert phi.values[(0, 1)] == pytest.approx(-2.3)


def test_parse_potential_incomplete_table():
    m = parse_map(THREE)
    with pytest.raises(ConfigError, match="mismatch"):
        parse_potential("[potential]\ndepth = 1\nvalue.0 = 0.0\n", m)


def test_parse_potential_forbidden_word_rejected():
    m = parse_map(THREE)
    with pytest.raises(ConfigError):
        parse_potential("""
[potential]
depth = 2
value.2-2 = 0.0
""", m)


def test_parse_potential_unknown_builtin():
    m = parse_map(DOUBLING)
    with pytest.raises(ConfigError, match="builtin"):
        parse_potential("[potential]\nbuiltin = nope\n", m)
