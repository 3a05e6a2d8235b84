"""Simplified graph convolution: propagation, training, and beta tuning.

The classifier is softmax(S^L Z theta) where S is the symmetrically
normalized self-loop-augmented adjacency S = (D + bI)^{-1/2} (W + bI)
(D + bI)^{-1/2}.  Since the propagated features S^L Z do not depend on
theta, training theta is plain multinomial logistic regression on them: a
convex problem solved by full-batch gradient descent with backtracking, so
the loss sequence is nonincreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..instances import ProblemInstance, require_valid
from ..solvers import margin_loss, zero_one_loss


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent controls shared by the SGC and GCAN trainers."""

    iterations: int = 500
    learning_rate: float = 1.0
    max_halvings: int = 20
    fd_step: float = 1e-5
    gamma: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class SgcModel:
    """Depth, self-loop weight, and the linear classifier weights.

    ``theta`` is (d, c) for the softmax classifier or a length-d vector for
    a binary sigmoid readout.
    """

    depth: int
    beta: float
    theta: np.ndarray

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


def sgc_propagation(instance: ProblemInstance, beta: float) -> np.ndarray:
    """S = (D + bI)^{-1/2} (W + bI) (D + bI)^{-1/2}; depends on beta only."""
    require_valid(instance)
    W = instance.dense_adjacency() + beta * np.eye(instance.n)
    d = instance.degrees() + beta
    dinv = d ** -0.5
    return dinv[:, None] * W * dinv[None, :]


def sgc_features(instance: ProblemInstance, beta: float, depth: int) -> np.ndarray:
    """Propagated features S^L Z (equal to Z when depth is 0)."""
    if instance.features is None:
        raise ValueError("instance has no features")
    X = np.asarray(instance.features, dtype=np.float64)
    if depth == 0:
        return X.copy()
    S = sgc_propagation(instance, beta)
    for _ in range(depth):
        X = S @ X
    return X


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sgc_forward(instance: ProblemInstance, model: SgcModel) -> np.ndarray:
    """Row-stochastic class probabilities for every node."""
    X = sgc_features(instance, model.beta, model.depth)
    theta = np.asarray(model.theta, dtype=np.float64)
    if theta.ndim == 1:
        if theta.shape[0] != X.shape[1]:
            raise ValueError(f"theta length {theta.shape[0]} != feature dim {X.shape[1]}")
        p = 1.0 / (1.0 + np.exp(-(X @ theta)))
        return np.column_stack([1.0 - p, p])
    if theta.shape[0] != X.shape[1]:
        raise ValueError(f"theta rows {theta.shape[0]} != feature dim {X.shape[1]}")
    return _softmax(X @ theta)


def sgc_train_loss_and_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray,
                            num_classes: int) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows of X and its analytic theta-gradient."""
    P = _softmax(X @ theta)
    N = X.shape[0]
    ce = -float(np.mean(np.log(np.maximum(P[np.arange(N), y], 1e-300))))
    target = np.zeros_like(P)
    target[np.arange(N), y] = 1.0
    grad = X.T @ (P - target) / N
    return ce, grad


def _stack_labeled(instances, beta: float, depth: int):
    rows, ys = [], []
    for inst in instances:
        if not inst.labels:
            continue
        X = sgc_features(inst, beta, depth)
        for node, lab in sorted(inst.labels.items()):
            rows.append(X[node])
            ys.append(lab)
    if not rows:
        raise ValueError("no labeled nodes in the training instances")
    return np.asarray(rows), np.asarray(ys, dtype=np.int64)


def sgc_train(instances, beta: float, depth: int, config: GdConfig | None = None,
              num_classes: int | None = None) -> np.ndarray:
    """Fit theta by full-batch gradient descent on labeled-node cross-entropy.

    theta starts at zero; each step backtracks (halving, at most
    ``max_halvings``) until the loss does not increase, so the training loss
    is nonincreasing.  A zero iteration budget returns the initialization.
    """
    config = config or GdConfig()
    instances = list(instances)
    if num_classes is None:
        num_classes = instances[0].num_classes
    X, y = _stack_labeled(instances, beta, depth)
    theta = np.zeros((X.shape[1], num_classes))
    loss, grad = sgc_train_loss_and_grad(theta, X, y, num_classes)
    for _ in range(config.iterations):
        step = config.learning_rate
        for _ in range(config.max_halvings + 1):
            cand = theta - step * grad
            cand_loss, cand_grad = sgc_train_loss_and_grad(cand, X, y, num_classes)
            if cand_loss <= loss:
                theta, loss, grad = cand, cand_loss, cand_grad
                break
            step *= 0.5
        if np.abs(grad).max() < 1e-12:
            break
    return theta


def _eval_nodes(instance: ProblemInstance) -> np.ndarray:
    unlabeled = instance.unlabeled_nodes()
    return unlabeled if len(unlabeled) else np.arange(instance.n)


def _sgc_metrics(instances, model: SgcModel, gamma: float) -> tuple[float, float]:
    """(mean 0-1 loss, mean margin loss) over each instance's eval nodes."""
    zo, mg = [], []
    for inst in instances:
        probs = sgc_forward(inst, model)
        truth = inst.truth()
        nodes = _eval_nodes(inst)
        preds = probs.argmax(axis=1)
        zo.append(zero_one_loss(preds, truth, eval_nodes=nodes))
        if inst.num_classes == 2:
            y = np.where(truth[nodes] == 1, 1.0, -1.0)
            mg.append(float(np.mean(margin_loss(probs[nodes, 1], y, gamma))))
    return float(np.mean(zo)), float(np.mean(mg)) if mg else float("nan")


def export_sweep_csv(rows, path) -> None:
    """Write a beta/eta sweep table: param, train_acc, val_acc, margin_loss."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("param,train_acc,val_acc,margin_loss\n")
        for row in rows:
            fh.write(",".join(format(float(row[k]), ".17g")
                              for k in ("param", "train_acc", "val_acc",
                                        "margin_loss")) + "\n")


def tune_beta(train_instances, val_instances, depth: int, betas,
              config: GdConfig | None = None, loss: str = "zero_one"):
    """Train theta per beta, score on validation, return the best beta.

    Ties resolve to the smallest beta.  Returns ``(best_beta, rows)`` where
    each row is a dict with keys param, train_acc, val_acc, margin_loss.
    """
    if loss not in ("zero_one", "margin"):
        raise ValueError(f"loss must be zero_one or margin, got {loss!r}")
    config = config or GdConfig()
    betas = sorted(float(b) for b in betas)
    if not betas:
        raise ValueError("beta grid is empty")
    if any(not 0.0 <= b <= 1.0 for b in betas):
        raise ValueError("beta grid must lie inside [0, 1]")
    rows = []
    best_beta, best_score = None, None
    for beta in betas:
        theta = sgc_train(train_instances, beta, depth, config)
        model = SgcModel(depth=depth, beta=beta, theta=theta)
        train_zo, _ = _sgc_metrics(train_instances, model, config.gamma)
        val_zo, val_margin = _sgc_metrics(val_instances, model, config.gamma)
        score = val_zo if loss == "zero_one" else val_margin
        rows.append({
            "param": beta,
            "train_acc": 1.0 - train_zo,
            "val_acc": 1.0 - val_zo,
            "margin_loss": val_margin,
        })
        if best_score is None or score < best_score:
            best_beta, best_score = beta, score
    return best_beta, rows
