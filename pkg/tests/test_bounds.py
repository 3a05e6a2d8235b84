import pytest

from tunelab.gnn.bounds import (
    BoundInputs,
    gcan_constants,
    rademacher_bound_gcan,
    rademacher_bound_sgc,
    sgc_constants,
)

# Regression constants frozen from a 50-digit arbitrary-precision evaluation
# of the same formulas (mpmath); float64 must reproduce them to 1e-12.
SGC_REGRESSION_INPUTS = dict(m=100, d=3, L=2, gamma=1.0,
                             c_dl=1.0, c_dh=2.0, c_z=1.0, c_theta=1.0)
SGC_REGRESSION_VALUE = 7.4396287702211339

GCAN_REGRESSION_INPUTS = dict(m=100, d=3, L=2, gamma=1.0,
                              c_dl=1.0, c_z=1.0, c_u=1.5, r=3.0)
GCAN_REGRESSION_VALUE = 13.320102079480948


def test_sgc_regression_value():
    b = BoundInputs(**SGC_REGRESSION_INPUTS)
    k1, k2, k3 = sgc_constants(b)
    assert (k1, k2, k3) == (3.0, 84.0, 18.0)
    value = rademacher_bound_sgc(b)
    assert abs(value - SGC_REGRESSION_VALUE) / SGC_REGRESSION_VALUE <= 1e-12


def test_gcan_regression_value():
    b = BoundInputs(**GCAN_REGRESSION_INPUTS)
    k1, k2, k3, k4, A, B = gcan_constants(b)
    assert (k1, k2, k3, k4) == (30.375, 19.125, 47.25, 10.5)
    assert (A, B) == (401.625, 1002.75)
    value = rademacher_bound_gcan(b)
    assert abs(value - GCAN_REGRESSION_VALUE) / GCAN_REGRESSION_VALUE <= 1e-12


def second_summand_sgc(**kw):
    b = BoundInputs(**kw)
    return rademacher_bound_sgc(b) - 4.0 / kw["m"]


def test_sgc_bound_quadrupling_m_nearly_halves_tail():
    at_m = second_summand_sgc(**SGC_REGRESSION_INPUTS)
    kw = dict(SGC_REGRESSION_INPUTS, m=400)
    at_4m = second_summand_sgc(**kw)
    assert at_m / at_4m >= 1.9


def test_sgc_bound_increases_with_depth():
    values = []
    for L in (2, 3, 4):
        kw = dict(SGC_REGRESSION_INPUTS, L=L)
        values.append(rademacher_bound_sgc(BoundInputs(**kw)))
    assert values[0] < values[1] < values[2]
    # the depth-sensitive constant k2 dominates at these inputs
    for L in (2, 3, 4):
        _, k2, k3 = sgc_constants(BoundInputs(**dict(SGC_REGRESSION_INPUTS, L=L)))
        assert k2 > k3


def test_bounds_decrease_in_m():
    for make, inputs in ((rademacher_bound_sgc, SGC_REGRESSION_INPUTS),
                         (rademacher_bound_gcan, GCAN_REGRESSION_INPUTS)):
        small = make(BoundInputs(**dict(inputs, m=100)))
        large = make(BoundInputs(**dict(inputs, m=10_000)))
        assert large < small


def test_gcan_tail_halves_with_quadrupled_m():
    base = rademacher_bound_gcan(BoundInputs(**GCAN_REGRESSION_INPUTS)) - 4.0 / 100
    quad = rademacher_bound_gcan(BoundInputs(**dict(GCAN_REGRESSION_INPUTS, m=400))) - 4.0 / 400
    assert 1.8 <= base / quad <= 2.2


def test_dimension_factor_ratio_grows_with_d():
    ratios = []
    for d in (2, 4, 8, 16):
        sgc_kw = dict(SGC_REGRESSION_INPUTS, d=d)
        gcan_kw = dict(GCAN_REGRESSION_INPUTS, d=d)
        ratio = (rademacher_bound_gcan(BoundInputs(**gcan_kw))
                 / rademacher_bound_sgc(BoundInputs(**sgc_kw)))
        ratios.append(ratio)
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_log_argument_regime_guard():
    # tiny constants push the covering log argument below 1
    b = BoundInputs(m=1, d=1, L=1, gamma=1e6, c_dl=1.0, c_dh=1.0,
                    c_z=1e-9, c_theta=1e-9)
    with pytest.raises(ValueError, match="log argument"):
        rademacher_bound_sgc(b)


def test_degenerate_geometric_sum_guards():
    # k1 = (1 + c_dh)/c_dl = 1 requires c_dl > c_dh, rejected upstream
    with pytest.raises(ValueError, match="c_dl"):
        BoundInputs(m=10, d=2, L=2, gamma=1.0, c_dl=3.0, c_dh=2.0,
                    c_z=1.0, c_theta=1.0)
    # k4 = c_u (1 + 2 r / c_dl) = 1 is reachable and must be rejected
    b = BoundInputs(m=10, d=2, L=2, gamma=1.0, c_dl=2.0, c_z=1.0,
                    c_u=0.5, r=1.0)
    with pytest.raises(ValueError, match="k4"):
        gcan_constants(b)


def test_missing_constants_and_validation():
    with pytest.raises(ValueError, match="missing required"):
        rademacher_bound_sgc(BoundInputs(m=10, d=2, L=1, gamma=0.5))
    with pytest.raises(ValueError, match="missing required"):
        rademacher_bound_gcan(BoundInputs(m=10, d=2, L=1, gamma=0.5, c_dl=1.0))
    with pytest.raises(ValueError):
        BoundInputs(m=0, d=2, L=1, gamma=0.5)
    with pytest.raises(ValueError):
        BoundInputs(m=10, d=2, L=1, gamma=0.0)
    with pytest.raises(ValueError):
        BoundInputs(m=10, d=2, L=1, gamma=0.5, c_z=-1.0)


def test_unused_constants_are_accepted():
    kw = dict(SGC_REGRESSION_INPUTS, c_w=5.0, c_v=2.0)
    assert rademacher_bound_sgc(BoundInputs(**kw)) == pytest.approx(SGC_REGRESSION_VALUE)
