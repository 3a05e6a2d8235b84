import numpy as np
import pytest

import oracles
from conftest import random_instance
from tunelab.gadgets import GadgetSpec, build_alternating, build_gadget
from tunelab.instances import ProblemInstance, label_matrix
from tunelab.profiler import (
    ProfilerConfig,
    dense_sweep_oracle,
    export_profile_csv,
    profile,
    score_gap,
    sweep_flip_counts,
)
from tunelab.solvers import ALPHA, DELTA, LAMBDA


def test_score_gap_gadget_signs(alpha_gadget):
    x = alpha_gadget.meta["gadget"]["x"]
    low = score_gap(alpha_gadget, ALPHA, 0.70, node=3, j=1, k=0)
    high = score_gap(alpha_gadget, ALPHA, 0.80, node=3, j=1, k=0)
    assert low < 0 < high
    assert np.sign(low) == np.sign(2 * 0.70 - np.sqrt(x + 2.0))
    assert np.sign(high) == np.sign(2 * 0.80 - np.sqrt(x + 2.0))


def test_score_gap_antisymmetry_and_errors(alpha_gadget):
    g = score_gap(alpha_gadget, ALPHA, 0.6, node=2, j=0, k=1)
    assert g == -score_gap(alpha_gadget, ALPHA, 0.6, node=2, j=1, k=0)
    with pytest.raises(ValueError):
        score_gap(alpha_gadget, ALPHA, 0.6, node=2, j=1, k=1)
    with pytest.raises(ValueError):
        score_gap(alpha_gadget, ALPHA, 0.6, node=9, j=0, k=1)


def test_score_gap_matches_dense_inverse_oracle():
    inst = random_instance(17, n_max=6)
    Y = label_matrix(inst)
    for param in np.linspace(0.05, 0.95, 20):
        F = oracles.delta_oracle(inst.dense_adjacency(), Y, param, 0.99)
        got = score_gap(inst, DELTA, param, node=1, j=0, k=1)
        assert abs(got - (F[1, 0] - F[1, 1])) <= 1e-8


def test_profile_single_gadget(alpha_gadget):
    prof = profile(alpha_gadget, ALPHA)
    assert len(prof.breakpoints) == 1
    assert abs(prof.breakpoints[0].location - 0.75) <= 1e-6
    assert prof.piece_losses == (0.0, 0.25)  # one flip changes loss by 1/n
    recs = prof.breakpoints[0].records
    assert [(r.node, r.class_from, r.class_to) for r in recs] == [(3, 0, 1)]
    assert not prof.unresolved


def test_profile_constant_for_self_loop_graph():
    inst = ProblemInstance(n=3, num_classes=2,
                           edges=[(i, i, 1.0) for i in range(3)],
                           labels={0: 0, 1: 1},
                           meta={"truth": [0, 1, 0]})
    prof = profile(inst, ALPHA)
    assert prof.breakpoints == ()
    assert len(prof.piece_losses) == 1


def test_profile_alternating_pattern():
    inst, witness = build_alternating("alpha", [0.72, 0.80, 0.88])
    prof = profile(inst, ALPHA)
    assert len(prof.breakpoints) == 3
    assert np.allclose(prof.locations, [0.72, 0.80, 0.88], atol=1e-6)
    assert prof.piece_losses == (1 / 12, 2 / 12, 1 / 12, 2 / 12)
    signs = [1 if l > witness else -1 for l in prof.piece_losses]
    assert signs == [-1, 1, -1, 1]
    # dense sweep agrees with the piece structure
    sweep = dense_sweep_oracle(inst, ALPHA, 100_000)
    for param, loss in sweep:
        if min(abs(param - b) for b in prof.locations) > 1e-6:
            assert prof.loss_at(param) == loss


def test_profile_oracle_agreement_random():
    for seed in (3, 14):
        inst = random_instance(seed, n_max=10)
        prof = profile(inst, DELTA, truth=inst.truth())
        assert not prof.unresolved
        assert all(v <= inst.n for v in prof.flip_counts().values())
        for param, loss in dense_sweep_oracle(inst, DELTA, 2000):
            if not prof.locations or min(abs(param - b) for b in prof.locations) > 1e-8:
                assert prof.loss_at(param) == loss


def test_profile_lambda_log_space():
    inst, _ = build_alternating("lambda", [1.5, 3.0])
    prof = profile(inst, LAMBDA)
    assert len(prof.breakpoints) == 2
    assert abs(prof.locations[0] - 1.5) / 1.5 <= 1e-6
    assert abs(prof.locations[1] - 3.0) / 3.0 <= 1e-6


def test_profile_determinism():
    inst = random_instance(8, n_max=10)
    a = profile(inst, ALPHA, truth=inst.truth())
    b = profile(inst, ALPHA, truth=inst.truth())
    assert a == b


def test_monotone_refinement():
    for seed in (2, 5, 11):
        inst = random_instance(seed, n_max=10)
        coarse = profile(inst, DELTA, ProfilerConfig(grid_size=256))
        fine = profile(inst, DELTA, ProfilerConfig(grid_size=512))
        for loc in coarse.locations:
            assert min(abs(loc - f) for f in fine.locations) <= 1e-8


def test_flip_count_bound_small():
    for seed in range(6):
        inst = random_instance(seed + 100, n_max=10, lambda_safe=True)
        for family in (ALPHA, LAMBDA, DELTA):
            counts = sweep_flip_counts(inst, family, 20_000)
            assert all(v <= inst.n for v in counts.values()), (family.kind, counts)


def test_unresolved_interval_flagging(alpha_gadget):
    config = ProfilerConfig(tolerance=1e-12, grid_size=2, max_depth=3)
    prof = profile(alpha_gadget, ALPHA, config)
    assert prof.unresolved  # three rounds cannot localize to 1e-12
    assert len(prof.piece_losses) == len(prof.breakpoints) + 1


def test_profile_instance_set_union():
    g1 = build_gadget(GadgetSpec(kind="alpha", threshold=0.74), u_truth=0)
    g2 = build_gadget(GadgetSpec(kind="alpha", threshold=0.9), u_truth=0)
    prof = profile([g1, g2], ALPHA)
    assert prof.num_instances == 2
    assert len(prof.breakpoints) == 2
    assert np.allclose(prof.locations, [0.74, 0.9], atol=1e-6)
    assert prof.piece_losses == (0.0, 0.125, 0.25)


def test_dense_sweep_oracle_contract(alpha_gadget):
    sweep = dense_sweep_oracle(alpha_gadget, ALPHA, 10_000)
    losses = [l for _, l in sweep]
    changes = [k for k in range(len(losses) - 1) if losses[k] != losses[k + 1]]
    assert len(changes) == 1
    lo, hi = sweep[changes[0]][0], sweep[changes[0] + 1][0]
    assert lo < 0.75 < hi
    with pytest.raises(ValueError):
        dense_sweep_oracle(alpha_gadget, ALPHA, 1)


def test_export_profile_csv(tmp_path, alpha_gadget):
    prof = profile(alpha_gadget, ALPHA)
    pieces = tmp_path / "pieces.csv"
    bps = tmp_path / "bps.csv"
    export_profile_csv(prof, pieces, bps)
    lines = pieces.read_text().strip().splitlines()
    assert lines[0] == "piece_lo,piece_hi,loss"
    assert len(lines) == 3
    blines = bps.read_text().strip().splitlines()
    assert blines[0] == "breakpoint,node,class_j,class_k"
    assert len(blines) == 2


def test_thread_count_determinism(monkeypatch):
    inst = random_instance(23, n_max=10)
    monkeypatch.setenv("TUNELAB_THREADS", "1")
    serial = profile([inst, inst], ALPHA)
    monkeypatch.setenv("TUNELAB_THREADS", "4")
    threaded = profile([inst, inst], ALPHA)
    assert serial == threaded


def test_profiler_config_validation():
    with pytest.raises(ValueError):
        ProfilerConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        ProfilerConfig(grid_size=1)
    with pytest.raises(ValueError):
        ProfilerConfig(max_depth=0)
