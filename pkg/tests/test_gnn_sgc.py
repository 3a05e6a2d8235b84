import numpy as np
import pytest

import oracles
from conftest import binary_feature_instance, random_instance
from tunelab.gnn import (
    GdConfig,
    SgcModel,
    export_sweep_csv,
    sgc_features,
    sgc_forward,
    sgc_propagation,
    sgc_train,
    sgc_train_loss_and_grad,
    tune_beta,
)
from tunelab.gnn.bounds import BoundInputs, sgc_constants
from tunelab.instances import ProblemInstance
from tunelab.solvers import margin_loss


def featured(seed, n=8, d=3):
    return random_instance(seed, n_max=n, with_features=True, d=d)


def test_forward_uniform_at_zero_theta():
    inst = featured(1)
    c = inst.num_classes
    model = SgcModel(depth=0, beta=0.3, theta=np.zeros((3, c)))
    probs = sgc_forward(inst, model)
    assert np.allclose(probs, 1.0 / c)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_forward_depth_zero_ignores_graph():
    inst = featured(2)
    theta = np.random.default_rng(0).normal(size=(3, inst.num_classes))
    model = SgcModel(depth=0, beta=0.7, theta=theta)
    logits = inst.features @ theta
    expected = np.exp(logits - logits.max(1, keepdims=True))
    expected /= expected.sum(1, keepdims=True)
    assert np.allclose(sgc_forward(inst, model), expected, atol=1e-12)


def test_self_loop_construction_identity():
    # beta=0 on a graph with unit self-loops == beta=1 on the same graph bare
    rng = np.random.default_rng(3)
    n = 6
    base_edges = [(i, j, float(rng.uniform(0.5, 1.5)))
                  for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6]
    feats = rng.normal(size=(n, 3))
    bare = ProblemInstance(n=n, num_classes=2, edges=base_edges,
                           labels={0: 0, 1: 1}, features=feats)
    looped = ProblemInstance(n=n, num_classes=2,
                             edges=base_edges + [(i, i, 1.0) for i in range(n)],
                             labels={0: 0, 1: 1}, features=feats)
    assert np.allclose(sgc_propagation(looped, 0.0), sgc_propagation(bare, 1.0),
                       atol=1e-14)
    theta = rng.normal(size=(3, 2))
    out_a = sgc_forward(looped, SgcModel(depth=2, beta=0.0, theta=theta))
    out_b = sgc_forward(bare, SgcModel(depth=2, beta=1.0, theta=theta))
    assert np.allclose(out_a, out_b, atol=1e-14)


def test_forward_matches_naive_oracle():
    inst = featured(4, n=8)
    rng = np.random.default_rng(7)
    theta = rng.normal(size=(3, inst.num_classes))
    expected_scores = oracles.naive_sgc_scores(
        inst.dense_adjacency(), inst.features, 0.4, 2, theta)
    got = sgc_features(inst, 0.4, 2) @ theta
    assert np.abs(got - expected_scores).max() <= 1e-10
    probs = sgc_forward(inst, SgcModel(depth=2, beta=0.4, theta=theta))
    e = np.exp(expected_scores - expected_scores.max(1, keepdims=True))
    assert np.abs(probs - e / e.sum(1, keepdims=True)).max() <= 1e-10


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    inst = binary_feature_instance(5, n=10)
    X = sgc_features(inst, 0.5, 2)[sorted(inst.labels)]
    y = np.array([inst.labels[k] for k in sorted(inst.labels)])
    for _ in range(10):
        theta = rng.normal(size=(3, 2))
        _, grad = sgc_train_loss_and_grad(theta, X, y, 2)
        fd = np.zeros_like(theta)
        h = 1e-6
        for idx in np.ndindex(theta.shape):
            plus, minus = theta.copy(), theta.copy()
            plus[idx] += h
            minus[idx] -= h
            fd[idx] = (sgc_train_loss_and_grad(plus, X, y, 2)[0]
                       - sgc_train_loss_and_grad(minus, X, y, 2)[0]) / (2 * h)
        denom = max(np.abs(fd).max(), 1e-12)
        assert np.abs(grad - fd).max() / denom <= 1e-5


def test_training_reaches_high_accuracy_on_separable_instances():
    insts = [binary_feature_instance(seed, n=12) for seed in (1, 2, 3)]
    theta = sgc_train(insts, beta=0.5, depth=2, config=GdConfig(iterations=500))
    correct = total = 0
    for inst in insts:
        X = sgc_features(inst, 0.5, 2)
        preds = (X @ theta).argmax(axis=1)
        for node, lab in inst.labels.items():
            correct += int(preds[node] == lab)
            total += 1
    assert correct / total >= 0.95


def test_zero_iterations_returns_zero_theta():
    inst = binary_feature_instance(9)
    theta = sgc_train([inst], beta=0.2, depth=1, config=GdConfig(iterations=0))
    assert np.array_equal(theta, np.zeros_like(theta))


def test_training_loss_monotone_in_budget():
    inst = binary_feature_instance(10)
    X = sgc_features(inst, 0.5, 2)[sorted(inst.labels)]
    y = np.array([inst.labels[k] for k in sorted(inst.labels)])
    losses = []
    for iters in (0, 5, 25, 100):
        theta = sgc_train([inst], beta=0.5, depth=2,
                          config=GdConfig(iterations=iters))
        losses.append(sgc_train_loss_and_grad(theta, X, y, 2)[0])
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_train_requires_labels():
    inst = binary_feature_instance(12)
    bare = ProblemInstance(n=inst.n, num_classes=2, edges=inst.edges,
                           labels={}, features=inst.features, meta=inst.meta)
    with pytest.raises(ValueError, match="no labeled nodes"):
        sgc_train([bare], beta=0.5, depth=1)


# -- beta tuning ----------------------------------------------------------------


def test_tune_beta_degenerate_split_minimizes_training_loss():
    insts = [binary_feature_instance(s, n=10) for s in (21, 22)]
    best, rows = tune_beta(insts, insts, depth=2, betas=[0.0, 0.5, 1.0],
                           config=GdConfig(iterations=80))
    by_val = {r["param"]: r["val_acc"] for r in rows}
    assert by_val[best] == max(by_val.values())
    assert all(r["train_acc"] == r["val_acc"] for r in rows)


def test_tune_beta_two_point_grid_matches_direct_comparison():
    train = [binary_feature_instance(s, n=12) for s in (31, 32)]
    val = [binary_feature_instance(s, n=12) for s in (33, 34)]
    cfg = GdConfig(iterations=60)
    best, rows = tune_beta(train, val, depth=2, betas=[0.0, 1.0], config=cfg)
    scores = {r["param"]: 1.0 - r["val_acc"] for r in rows}
    expected = min(sorted(scores), key=lambda b: (scores[b], b))
    assert best == expected


def test_tune_beta_singleton_and_errors():
    inst = binary_feature_instance(41)
    best, rows = tune_beta([inst], [inst], depth=1, betas=[0.3],
                           config=GdConfig(iterations=5))
    assert best == 0.3 and len(rows) == 1
    with pytest.raises(ValueError):
        tune_beta([inst], [inst], depth=1, betas=[])
    with pytest.raises(ValueError):
        tune_beta([inst], [inst], depth=1, betas=[1.5])
    with pytest.raises(ValueError):
        tune_beta([inst], [inst], depth=1, betas=[0.5], loss="hinge")


# -- margin-loss stability envelope ------------------------------------------------


def test_export_sweep_csv(tmp_path):
    inst = binary_feature_instance(41)
    _, rows = tune_beta([inst], [inst], depth=1, betas=[0.0, 1.0],
                        config=GdConfig(iterations=3))
    path = tmp_path / "sweep.csv"
    export_sweep_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "param,train_acc,val_acc,margin_loss"
    assert len(lines) == 3


def test_margin_change_within_lipschitz_envelope():
    gamma, depth = 0.5, 2
    rng = np.random.default_rng(77)
    for seed in range(8):
        inst = featured(200 + seed, n=10)
        W = inst.dense_adjacency()
        deg = inst.degrees()
        truth = inst.truth() % 2
        y = np.where(truth == 1, 1.0, -1.0)
        theta = rng.normal(size=3) * 0.5
        theta2 = theta + rng.normal(size=3) * 0.2
        beta, beta2 = rng.uniform(0, 1, size=2)
        c_z = float(np.linalg.norm(inst.features, axis=1).max())
        c_theta = float(max(np.linalg.norm(theta), np.linalg.norm(theta2)))
        b = BoundInputs(m=1, d=3, L=depth, gamma=gamma,
                        c_dl=float(deg.min()), c_dh=float(deg.max()),
                        c_z=c_z, c_theta=max(c_theta, 1e-9))
        _, k2, k3 = sgc_constants(b)
        t1 = sgc_features(inst, float(beta), depth) @ theta
        t2 = sgc_features(inst, float(beta2), depth) @ theta2
        f1 = 1.0 / (1.0 + np.exp(-t1))
        f2 = 1.0 / (1.0 + np.exp(-t2))
        envelope = (2.0 / gamma) * (
            k2 * abs(beta - beta2) + k3 * np.linalg.norm(theta - theta2))
        for i in range(inst.n):
            change = abs(margin_loss(f1[i], y[i], gamma)
                         - margin_loss(f2[i], y[i], gamma))
            assert change <= envelope + 1e-9
