import math

import numpy as np
import pytest

from ebound import catalog
from ebound.errors import BoundaryNode, NoAdmissiblePairs, NoDerivativeOracle, OutsideDomain
from ebound.fnmodel import GridSpec, discretize
from ebound.varanalysis import (bracket_distance, check_condition_iii, levelset_distance,
                                prox_regularity_modulus, subgrad_distance)


def test_bracket_distance():
    assert bracket_distance(-1.0, 1.0) == 0.0
    assert bracket_distance(1.0, -1.0) == 0.0
    assert bracket_distance(0.5, 2.0) == 0.5
    assert bracket_distance(-3.0, -0.25) == 0.25


def test_subgrad_quadratic(quadratic):
    r = subgrad_distance(quadratic, 1.0)
    assert r.value == 2.0 and r.method == "derivative-oracle"


def test_subgrad_staircase_before_jump(staircase):
    n = 11
    x = 1 / (n - 1) - 1e-9
    assert subgrad_distance(staircase, x).value <= 2 / (n - 1)


def test_subgrad_absval_grid_kink(absval):
    g = discretize(absval, -1, 1, 0.01)
    r = subgrad_distance(g, 0.0)
    assert r.value == 0.0 and r.method == "grid-secant" and r.spacing == 0.01


def test_subgrad_grid_errors():
    g = GridSpec(0.0, 1.0, [1.0, np.inf, 0.0, 1.0])
    with pytest.raises(BoundaryNode):
        subgrad_distance(g, 0.0)
    with pytest.raises(OutsideDomain):
        subgrad_distance(g, 1.0)


@pytest.mark.parametrize("h", [1e-2, 1e-3, 1e-4])
def test_subgrad_grid_converges(quadratic, h):
    g = discretize(quadratic, -1, 1, h)
    i = g.nearest_index(0.5)
    assert abs(subgrad_distance(g, g.node(i)).value - 1.0) <= 2 * h


def test_levelset_quadratic(quadratic):
    r = levelset_distance(quadratic, 0.0, 0.3, 1.0, anchors=(0.0,))
    assert r.value == pytest.approx(0.3, abs=1e-12)


def test_levelset_staircase(staircase):
    r = levelset_distance(staircase, 0.0, 0.4, 1.0)
    assert r.value == pytest.approx(0.4, abs=1e-12)
    assert r.witness == pytest.approx(0.0, abs=1e-12)


def test_levelset_empty(quadratic):
    r = levelset_distance(quadratic, -1.0, 0.0, 10.0)
    assert r.value == math.inf and r.witness is None


def test_levelset_window_must_be_positive(quadratic):
    with pytest.raises(ValueError):
        levelset_distance(quadratic, 0.0, 0.3, 0.0)


def test_levelset_grid_is_one_lipschitz(staircase):
    g = discretize(staircase, -0.5, 0.5, 1e-3)
    ds = [levelset_distance(g, 0.05, g.node(i), 2.0).value for i in range(len(g))]
    assert np.all(np.abs(np.diff(ds)) <= g.h * (1 + 1e-9))


def test_proxreg_convex(quadratic):
    assert prox_regularity_modulus(quadratic, 0.0, 0.5).rho_hat == 0.0


def test_proxreg_concave():
    f = catalog.get("neg_quadratic").spec
    r = prox_regularity_modulus(f, 0.0, 0.3)
    assert r.rho_hat == pytest.approx(2.0, abs=0.05)
    assert r.sample_pairs > 0 and r.worst_pair is not None


def test_proxreg_rejects_grid(quadratic):
    with pytest.raises(NoDerivativeOracle):
        prox_regularity_modulus(discretize(quadratic, -1, 1, 0.1), 0.0, 0.5)


def test_proxreg_no_admissible_pairs(quadratic):
    # |2x| < eps fails everywhere except within eps/2 of 0, and f(x) < eps
    with pytest.raises(NoAdmissiblePairs):
        prox_regularity_modulus(quadratic, 5.0, 0.01, pair_count=50)


@pytest.mark.parametrize("name", ["quadratic", "neg_quadratic", "oscillatory", "two_well"])
def test_proxreg_monotone_in_eps(name):
    f = catalog.get(name).spec
    center = -1.0 if name == "two_well" else 0.0
    rhos = [prox_regularity_modulus(f, center, e).rho_hat for e in (0.4, 0.2, 0.1)]
    for big, small in zip(rhos, rhos[1:]):
        assert small <= big + 0.05


def test_condition_iii_oscillatory_sufficient(oscillatory):
    assert check_condition_iii(oscillatory, 0.5, 0.0, 0.3, mode="sufficient").holds is True


def test_condition_iii_quadratic(quadratic):
    assert check_condition_iii(quadratic, 0.5, 0.0, 0.5).holds is True


def test_condition_iii_two_well_fails():
    f = catalog.get("two_well").spec
    r = check_condition_iii(f, 1.0, -1.0, 0.5)
    assert r.holds is False
    w = r.witnesses[0]
    assert w["f_prox_max"] < w["f_center"]
    assert check_condition_iii(f, 1.0, -1.0, 0.5, mode="sufficient").holds is None
    assert r.to_json()["holds"] is False


@pytest.mark.parametrize("name,center", [("quadratic", 0.0), ("absval", 0.0),
                                         ("staircase", 0.0), ("two_well", 1.0)])
def test_sufficient_implies_direct(name, center):
    f = catalog.get(name).spec
    if check_condition_iii(f, 0.5, center, 0.3, mode="sufficient").holds:
        assert check_condition_iii(f, 0.5, center, 0.3).holds is True


def test_condition_iii_rejects_mode(quadratic):
    with pytest.raises(ValueError):
        check_condition_iii(quadratic, 0.5, 0.0, 0.3, mode="guess")
