"""Convolution/attention interpolation network (binary node classification).

Each layer mixes attention weights with degree-normalized weights through a
coefficient eta in [0, 1]:

    h_i^l = act( sum_{j in N_i} (eta * e_ij + (1 - eta) / sqrt(d_i d_j)) U h_j^{l-1} )

where the attention scores come from the previous layer's embeddings,

    ehat_ij = act(V^l . [U h_i^{l-1}, U h_j^{l-1}]),
    e_ij = softmax over j in N_i of ehat_ij,

U is a single d x d matrix shared across layers, V^l is a per-layer row of
length 2d, and N_i = {j : W_ij != 0}.  eta = 0 is a plain degree-normalized
convolution; eta = 1 is a plain attention network.  The binary readout is
sigmoid of the first embedding coordinate.

Training is deliberately desk-scale (n <= 32, d <= 8, L <= 2): gradient
descent on the labeled-node margin loss with central finite-difference
gradients and backtracking halving.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..instances import ProblemInstance, require_valid
from ..solvers import margin_loss, zero_one_loss
from .sgc import GdConfig

MAX_TRAIN_NODES = 32
MAX_TRAIN_DIM = 8
MAX_TRAIN_DEPTH = 2


def _relu(x):
    return np.maximum(x, 0.0)


def _tanh(x):
    return np.tanh(x)


def _identity(x):
    return x


ACTIVATIONS = {"relu": _relu, "tanh": _tanh, "identity": _identity}


@dataclass(frozen=True)
class GcanModel:
    """Depth, interpolation coefficient, and the learnable parameters."""

    depth: int
    eta: float
    U: np.ndarray
    V: np.ndarray  # (depth, 2d) attention rows
    activation: str = "relu"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        d = self.U.shape[0]
        if self.U.shape != (d, d):
            raise ValueError("U must be square")
        if self.V.shape != (self.depth, 2 * d):
            raise ValueError(f"V must have shape ({self.depth}, {2 * d})")


def init_gcan(d: int, depth: int, eta: float, seed: int = 0,
              activation: str = "relu") -> GcanModel:
    """U and V entries i.i.d. uniform in [-0.1, 0.1] under the seed."""
    rng = np.random.default_rng(seed)
    U = rng.uniform(-0.1, 0.1, size=(d, d))
    V = rng.uniform(-0.1, 0.1, size=(depth, 2 * d))
    return GcanModel(depth=depth, eta=eta, U=U, V=V, activation=activation)


def _run_layers(instance: ProblemInstance, model: GcanModel
                ) -> tuple[np.ndarray, list[np.ndarray]]:
    require_valid(instance)
    if instance.features is None:
        raise ValueError("instance has no features")
    act = ACTIVATIONS[model.activation]
    W = instance.dense_adjacency()
    deg = instance.degrees()
    neighbors = [np.nonzero(W[i] != 0)[0] for i in range(instance.n)]
    H = np.asarray(instance.features, dtype=np.float64)
    attention = []
    for level in range(model.depth):
        UH = H @ model.U.T
        d = UH.shape[1]
        v = model.V[level]
        E = np.zeros((instance.n, instance.n))
        newH = np.empty_like(UH)
        for i in range(instance.n):
            nb = neighbors[i]
            ehat = act(v[:d] @ UH[i] + UH[nb] @ v[d:])
            att = np.exp(ehat - ehat.max())
            att /= att.sum()
            E[i, nb] = att
            coef = model.eta * att + (1.0 - model.eta) / np.sqrt(deg[i] * deg[nb])
            newH[i] = act(coef @ UH[nb])
        attention.append(E)
        H = newH
    return H, attention


def gcan_forward(instance: ProblemInstance, model: GcanModel
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Return (final embeddings H, binary probabilities sigmoid(H[:, 0]))."""
    H, _ = _run_layers(instance, model)
    probs = 1.0 / (1.0 + np.exp(-H[:, 0]))
    return H, probs


def attention_matrices(instance: ProblemInstance, model: GcanModel) -> list[np.ndarray]:
    """Per-layer (n, n) attention weights (zero outside neighborhoods)."""
    return _run_layers(instance, model)[1]


def gcan_margin_loss(instances, model: GcanModel, gamma: float) -> float:
    """Mean margin loss over the labeled nodes of all instances."""
    total, count = 0.0, 0
    for inst in instances:
        if inst.num_classes != 2:
            raise ValueError("the binary readout needs two-class instances")
        _, probs = gcan_forward(inst, model)
        for node, lab in sorted(inst.labels.items()):
            y = 1.0 if lab == 1 else -1.0
            total += margin_loss(probs[node], y, gamma)
            count += 1
    if count == 0:
        raise ValueError("no labeled nodes")
    return total / count


def _check_scale(instances, depth: int) -> None:
    for inst in instances:
        if inst.n > MAX_TRAIN_NODES:
            raise ValueError(
                f"finite-difference training is desk-scale only: n={inst.n} "
                f"exceeds {MAX_TRAIN_NODES}")
        if inst.features is None or inst.features.shape[1] > MAX_TRAIN_DIM:
            raise ValueError(
                f"finite-difference training needs feature dim <= {MAX_TRAIN_DIM}")
    if depth > MAX_TRAIN_DEPTH:
        raise ValueError(f"finite-difference training needs depth <= {MAX_TRAIN_DEPTH}")


def _fd_gradient(instances, model: GcanModel, gamma: float, step: float):
    """Central finite differences over every entry of U and V."""
    gU = np.zeros_like(model.U)
    gV = np.zeros_like(model.V)
    for idx in np.ndindex(model.U.shape):
        U_plus, U_minus = model.U.copy(), model.U.copy()
        U_plus[idx] += step
        U_minus[idx] -= step
        up = gcan_margin_loss(instances, replace(model, U=U_plus), gamma)
        dn = gcan_margin_loss(instances, replace(model, U=U_minus), gamma)
        gU[idx] = (up - dn) / (2.0 * step)
    for idx in np.ndindex(model.V.shape):
        V_plus, V_minus = model.V.copy(), model.V.copy()
        V_plus[idx] += step
        V_minus[idx] -= step
        up = gcan_margin_loss(instances, replace(model, V=V_plus), gamma)
        dn = gcan_margin_loss(instances, replace(model, V=V_minus), gamma)
        gV[idx] = (up - dn) / (2.0 * step)
    return gU, gV


def gcan_train(instances, eta: float, depth: int,
               config: GdConfig | None = None,
               activation: str = "relu") -> GcanModel:
    """Descend the labeled-node margin loss; loss never increases per step.

    Steps use central finite-difference gradients (``config.fd_step``) and
    backtracking halving (at most ``config.max_halvings``); a step that still
    increases the loss after all halvings is rejected.  Zero iterations
    return the seeded initialization unchanged.

    With the default ReLU layers the readout coordinate is nonnegative, which
    pins small initializations to the flat region of the margin loss; pick a
    sign-preserving activation such as ``tanh`` when training matters.
    """
    config = config or GdConfig(iterations=100, learning_rate=0.5)
    instances = list(instances)
    _check_scale(instances, depth)
    d = instances[0].features.shape[1]
    model = init_gcan(d, depth, eta, seed=config.seed, activation=activation)
    loss = gcan_margin_loss(instances, model, config.gamma)
    for _ in range(config.iterations):
        gU, gV = _fd_gradient(instances, model, config.gamma, config.fd_step)
        gnorm = max(np.abs(gU).max(), np.abs(gV).max() if gV.size else 0.0)
        if gnorm < 1e-12:
            break
        step = config.learning_rate
        for _ in range(config.max_halvings + 1):
            cand = replace(model, U=model.U - step * gU, V=model.V - step * gV)
            cand_loss = gcan_margin_loss(instances, cand, config.gamma)
            if cand_loss <= loss:
                model, loss = cand, cand_loss
                break
            step *= 0.5
    return model


def tune_eta(train_instances, val_instances, depth: int, etas,
             config: GdConfig | None = None, activation: str = "relu"):
    """Train per eta, score validation accuracy, return the best eta.

    Accuracy is 0-1 accuracy on each validation instance's unlabeled nodes
    (all nodes when fully labeled); ties resolve to the smallest eta.
    Returns ``(best_eta, rows)`` with one table row per eta.
    """
    config = config or GdConfig(iterations=100, learning_rate=0.5)
    etas = sorted(float(e) for e in etas)
    if not etas:
        raise ValueError("eta grid is empty")
    if any(not 0.0 <= e <= 1.0 for e in etas):
        raise ValueError("eta grid must lie inside [0, 1]")
    rows = []
    best_eta, best_acc = None, None
    for eta in etas:
        model = gcan_train(train_instances, eta, depth, config, activation)
        train_acc = _gcan_accuracy(train_instances, model)
        val_acc = _gcan_accuracy(val_instances, model)
        rows.append({
            "param": eta,
            "train_acc": train_acc,
            "val_acc": val_acc,
            "margin_loss": gcan_margin_loss(train_instances, model, config.gamma),
        })
        if best_acc is None or val_acc > best_acc:
            best_eta, best_acc = eta, val_acc
    return best_eta, rows


def _gcan_accuracy(instances, model: GcanModel) -> float:
    accs = []
    for inst in instances:
        _, probs = gcan_forward(inst, model)
        preds = (probs > 0.5).astype(np.int64)
        truth = inst.truth()
        unlabeled = inst.unlabeled_nodes()
        nodes = unlabeled if len(unlabeled) else np.arange(inst.n)
        accs.append(1.0 - zero_one_loss(preds, truth, eval_nodes=nodes))
    return float(np.mean(accs))
