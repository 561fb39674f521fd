import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from protolife.lockkey import (AttachmentKind, closest_function_point, cycle_distance, functional_potency,
                               matching_coefficient, select_project, snap_signature)
from oracles import closest_point, k_func

D_CRIT = 0.1


@pytest.mark.parametrize("a,b,d", [(0.3, 0.3, 0.0), (0.1, 0.9, 0.2), (0.25, 0.75, 0.5)])
def test_cycle_distance_examples(a, b, d):
    assert cycle_distance(a, b) == pytest.approx(d, abs=1e-15)


def test_matching_coefficient_endpoints():
    assert matching_coefficient(0.0, D_CRIT) == 1.0
    assert matching_coefficient(D_CRIT, D_CRIT) == 0.0
    assert matching_coefficient(0.3, D_CRIT) == 0.0
    assert matching_coefficient(D_CRIT / 2, D_CRIT) == pytest.approx(0.5, abs=1e-15)


def test_potency_on_function_point():
    assert functional_potency(0.4) == (1.0, AttachmentKind.PHAGORECEPTOR)


def test_potency_midway_ties_to_lower_kind():
    k, kind = functional_potency(0.5)
    assert kind is AttachmentKind.PHAGORECEPTOR
    assert k == 0.0
    assert closest_point(Fraction(1, 2))[0] == 2


def test_potency_wraps_to_flagellum():
    k, kind = functional_potency(0.95)
    assert kind is AttachmentKind.FLAGELLUM
    assert k == pytest.approx(float(k_func(Fraction(95, 100))), abs=1e-12)
    assert k == pytest.approx(0.5, abs=1e-12)


def test_lattice_kinds_match_oracle():
    for i in range(128):
        kind, _ = closest_function_point(i / 128)
        assert kind == closest_point(Fraction(i, 128))[0]


def test_snap_signature_wraps():
    assert snap_signature(0.999, 128) == 0
    assert snap_signature(0.5, 128) == 64
    assert snap_signature(-0.25, 128) == 96


def test_select_project_empty():
    assert select_project(0.4, {}, 128) == [0.0] * 5


def test_select_project_single_exact_molecule():
    q = 3.0
    idx = round(0.4 * 128)  # 51/128, nearest lattice point to 0.4
    s = idx / 128
    drive = select_project(s, {idx: q}, 128)
    expected = q * float(k_func(Fraction(idx, 128)))
    assert drive[AttachmentKind.PHAGORECEPTOR] == pytest.approx(expected, rel=1e-12)
    assert all(d == 0.0 for i, d in enumerate(drive) if i != AttachmentKind.PHAGORECEPTOR)
    assert select_project(s, {idx: 2 * q}, 128)[2] == pytest.approx(2 * expected, rel=1e-12)


def test_select_project_boundary_molecule_has_no_drive():
    assert select_project(0.5, {64: 5.0}, 128) == [0.0] * 5


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_cycle_distance_bounds_symmetry(a, b):
    d = cycle_distance(a, b)
    assert 0.0 <= d <= 0.5
    assert d == cycle_distance(b, a)


@given(st.floats(0, 1, exclude_max=True),
       st.dictionaries(st.integers(0, 127), st.floats(0, 10), max_size=6))
def test_drive_nonnegative(sig, mols):
    assert all(d >= 0.0 for d in select_project(sig, mols, 128))


@given(st.floats(0, 1, exclude_max=True))
def test_coefficients_in_unit_interval(s):
    k, _ = functional_potency(s)
    assert 0.0 <= k <= 1.0
    assert 0.0 <= matching_coefficient(cycle_distance(s, 0.3), D_CRIT) <= 1.0


def test_random_lattice_pairs_agree_with_exact_oracle():
    rng = random.Random(0)
    for _ in range(2000):
        i, j = rng.randrange(128), rng.randrange(128)
        exact = abs(Fraction(i, 128) - Fraction(j, 128))
        exact = min(exact, 1 - exact)
        assert math.isclose(cycle_distance(i / 128, j / 128), float(exact), abs_tol=1e-15)
