import math

import numpy as np
import pytest

from tunelab import gadgets
from tunelab.gadgets import (
    GadgetError,
    GadgetSpec,
    admissible_range,
    build_alternating,
    build_gadget,
    build_shatter_family,
    load_shatter_family,
    save_shatter_family,
    verify_flip,
    verify_shattering,
)
from tunelab.instances import disjoint_union, validate
from tunelab.profiler import profile
from tunelab.solvers import ALPHA, DELTA, LAMBDA, get_family


def family_for(kind, c_const=0.99):
    return get_family(kind, c_const) if kind == "delta" else get_family(kind)


# -- spec admissibility -----------------------------------------------------------


def test_spec_derived_weights():
    assert math.isclose(GadgetSpec(kind="alpha", threshold=0.75).x, 0.25)
    assert math.isclose(GadgetSpec(kind="lambda", threshold=2.0).x, 4.0)
    spec = GadgetSpec(kind="delta", threshold=0.98, c_const=0.99)
    assert spec.x == (2 * 0.99) ** (1 / 0.98) - 2 > 0


def test_alpha_spec_range():
    with pytest.raises(GadgetError):
        GadgetSpec(kind="alpha", threshold=0.6)
    with pytest.raises(GadgetError):
        GadgetSpec(kind="alpha", threshold=1.0 / math.sqrt(2.0))  # x would be 0
    with pytest.raises(GadgetError):
        GadgetSpec(kind="alpha", threshold=1.0)


def test_lambda_spec_range():
    with pytest.raises(GadgetError):
        GadgetSpec(kind="lambda", threshold=1.0)
    with pytest.raises(GadgetError):
        GadgetSpec(kind="lambda", threshold=0.5)


def test_delta_spec_range_charted():
    # c = 0.75: admissible thresholds stop at ln(1.5)/ln(2) ~ 0.585
    for bad in (0.8, 0.99):
        with pytest.raises(GadgetError, match="positive"):
            GadgetSpec(kind="delta", threshold=bad, c_const=0.75)
    GadgetSpec(kind="delta", threshold=0.4, c_const=0.75)  # inside the window
    # c <= 1/2 admits nothing
    with pytest.raises(GadgetError, match="c_const > 1/2"):
        GadgetSpec(kind="delta", threshold=0.3, c_const=0.5)
    lo, hi = admissible_range("delta", 0.99)
    assert lo == 0.0 and math.isclose(hi, math.log(1.98) / math.log(2.0))
    assert admissible_range("delta", 0.4) == (0.0, 0.0)


def test_gadget_instances_are_valid():
    for kind, t in (("alpha", 0.8), ("lambda", 3.0), ("delta", 0.5)):
        inst = build_gadget(GadgetSpec(kind=kind, threshold=t))
        assert validate(inst) == []
        assert len(inst.unlabeled_nodes()) == 1
        assert inst.meta["gadget"]["family"] == kind


# -- flip verification -------------------------------------------------------------


@pytest.mark.parametrize("kind,threshold", [
    ("alpha", 0.75), ("lambda", 2.0), ("delta", 0.98),
])
def test_verify_flip_examples(kind, threshold):
    spec = GadgetSpec(kind=kind, threshold=threshold)
    inst = build_gadget(spec)
    measured = verify_flip(inst, family_for(kind), tol=1e-6)
    assert abs(measured - threshold) <= 1e-6


def test_verify_flip_randomized():
    rng = np.random.default_rng(2024)
    windows = {"alpha": (0.715, 0.985), "lambda": (1.05, 15.0),
               "delta": (0.05, 0.96)}
    for kind, (lo, hi) in windows.items():
        for t in lo + (hi - lo) * rng.random(8):
            inst = build_gadget(GadgetSpec(kind=kind, threshold=float(t)))
            measured = verify_flip(inst, family_for(kind), tol=1e-6)
            assert abs(measured - t) <= 1e-6, (kind, t, measured)


def test_verify_flip_rejects_multiple_flips():
    g1 = build_gadget(GadgetSpec(kind="alpha", threshold=0.73))
    g2 = build_gadget(GadgetSpec(kind="alpha", threshold=0.9))
    with pytest.raises(GadgetError, match="exactly one"):
        verify_flip(disjoint_union([g1, g2]), ALPHA)


# -- alternating instances -----------------------------------------------------------


def test_alternating_single_reduces_to_gadget():
    inst, witness = build_alternating("alpha", [0.8])
    assert inst.n == 4
    prof = profile(inst, ALPHA)
    assert len(prof.breakpoints) == 1
    assert prof.piece_losses == (0.0, 0.25)
    assert witness == 0.125


def test_alternating_witness_between_levels():
    for kind in ("alpha", "lambda", "delta"):
        ts = {"alpha": [0.73, 0.8, 0.9], "lambda": [1.5, 2.5, 4.0],
              "delta": [0.3, 0.5, 0.7]}[kind]
        inst, witness = build_alternating(kind, ts)
        l_min, l_max = inst.meta["alternating"]["loss_levels"]
        assert l_min < witness < l_max
        prof = profile(inst, family_for(kind))
        assert set(prof.piece_losses) == {l_min, l_max}
        assert prof.piece_losses[0] == l_min


def test_alternating_rejects_bad_thresholds():
    with pytest.raises(GadgetError):
        build_alternating("alpha", [])
    with pytest.raises(GadgetError):
        build_alternating("alpha", [0.8, 0.8])
    with pytest.raises(GadgetError):
        build_alternating("alpha", [0.9, 0.8])


# -- shattering ----------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["alpha", "lambda", "delta"])
def test_shatter_small(kind):
    for m in (1, 2, 3):
        fam = build_shatter_family(kind, m)
        for i, inst in enumerate(fam.instances, start=1):
            assert inst.n == 4 * (2 ** i - 1)
        report = verify_shattering(fam)
        assert report.passed, (kind, m, report.missing)
        assert len(report.achieved) == 2 ** m
        expected = tuple(tuple((j >> (m - 1 - b)) & 1 for b in range(m))
                         for j in range(2 ** m))
        assert report.cell_patterns == expected


def test_shatter_corrupt_witness_fails():
    fam = build_shatter_family("alpha", 2)
    corrupted = gadgets.ShatterFamily(
        kind=fam.kind, c_const=fam.c_const, m=fam.m, ladder=fam.ladder,
        instances=fam.instances,
        witnesses=(fam.witnesses[0] + 1.0,) + fam.witnesses[1:],
    )
    report = verify_shattering(corrupted)
    assert not report.passed
    assert report.missing  # the unreachable patterns are enumerated


def test_shatter_delta_needs_wide_window():
    with pytest.raises(GadgetError, match="0.9"):
        build_shatter_family("delta", 2, c_const=0.7)


def test_shatter_round_trip(tmp_path):
    fam = build_shatter_family("lambda", 2)
    save_shatter_family(fam, tmp_path)
    loaded = load_shatter_family(tmp_path)
    assert loaded.kind == fam.kind
    assert loaded.ladder == fam.ladder
    assert loaded.witnesses == fam.witnesses
    assert loaded.instances == fam.instances
    assert verify_shattering(loaded).passed


# -- locality -------------------------------------------------------------------------


def test_disjoint_union_leaves_original_scores_unchanged():
    base = build_gadget(GadgetSpec(kind="alpha", threshold=0.8))
    extra = build_gadget(GadgetSpec(kind="alpha", threshold=0.9))
    combined = disjoint_union([base, extra])
    for family, param in ((ALPHA, 0.77), (LAMBDA, 2.3), (DELTA, 0.6)):
        alone = family.solve(base, param).F
        together = family.solve(combined, param).F[:4]
        assert np.abs(alone - together).max() <= 1e-10
