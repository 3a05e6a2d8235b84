"""Closed-form label-propagation solvers and loss evaluation.

Three one-parameter families are supported, each solving one linear system
per parameter value:

* ``alpha``  (local/global trade-off):  (I - a*S) F = (1-a) Y with
  S = D^{-1/2} W D^{-1/2}, a in (0, 1).
* ``lambda`` (smoothing strength):      (S + lam*Delta) F = lam*Y with
  S = D - W, Delta the labeled-node indicator, lam > 0.
* ``delta``  (normalization exponent):  (I - c*S) F = Y with
  S = D^{-dl} W D^{dl-1}, dl in [0, 1], constant c in (0, 1).

Systems with n <= 2048 are solved by dense LU with partial pivoting (through
the active sweep backend); larger systems go through a sparse conjugate
gradient on a symmetrized form.  Every solve must satisfy
``max|A F - b| <= 1e-8``; residuals are tracked in :data:`RESIDUALS`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .instances import ProblemInstance, TunelabError, label_matrix, require_valid

RESIDUAL_LIMIT = 1e-8
DENSE_LIMIT = 2048

# Sweep/profile clamps for the open or unbounded parameter domains.
ALPHA_DOMAIN = (1e-6, 1.0 - 1e-6)
LAMBDA_DOMAIN = (1e-6, 1e6)
DELTA_DOMAIN = (0.0, 1.0)

DEFAULT_C_CONST = 0.99


class SolverError(TunelabError):
    """A linear solve failed or its preconditions do not hold."""


@dataclass
class ResidualStats:
    """Running record of solver backward residuals (thread-safe)."""

    count: int = 0
    max_residual: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, residual: float, solves: int = 1) -> None:
        with self._lock:
            self.count += solves
            if residual > self.max_residual:
                self.max_residual = residual

    def reset(self) -> None:
        with self._lock:
            self.count = 0
            self.max_residual = 0.0


RESIDUALS = ResidualStats()


def _record(residual: float, solves: int) -> None:
    RESIDUALS.record(residual, solves)
    if residual > RESIDUAL_LIMIT:
        raise SolverError(
            f"solver residual {residual:.3e} exceeds limit {RESIDUAL_LIMIT:.0e}"
        )


@dataclass(frozen=True)
class ScoreMatrix:
    """Soft-label scores from one solve.

    ``F`` has shape (n, c); a 1-D ``F`` is the signed two-class score used by
    the smoothing family's signed-label encoding (positive means class 1).
    """

    F: np.ndarray
    family: str
    param: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.F)):
            raise SolverError("score matrix has non-finite entries")


# -- family parameter checks ---------------------------------------------------


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _check_lambda(lam: float) -> None:
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")


def _check_delta(delta: float, c_const: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if not 0.0 < c_const < 1.0:
        raise ValueError(f"c_const must lie in (0, 1), got {c_const}")


# -- static per-instance arrays (cached on the instance) ------------------------


def _alpha_prep(instance: ProblemInstance):
    key = "solver_alpha"
    prep = instance._cache.get(key)
    if prep is None:
        require_valid(instance)
        W = instance.dense_adjacency()
        dinv = instance.degrees() ** -0.5
        S = dinv[:, None] * W * dinv[None, :]
        prep = (np.ascontiguousarray(S), label_matrix(instance))
        instance._cache[key] = prep
    return prep


def _lambda_prep(instance: ProblemInstance, signed: bool):
    key = ("solver_lambda", signed)
    prep = instance._cache.get(key)
    if prep is None:
        require_valid(instance)
        if not instance.labels:
            raise SolverError("smoothing family needs at least one labeled node")
        for comp in instance.connected_components():
            if not any(node in instance.labels for node in comp):
                raise SolverError(
                    f"connected component {comp} has no labeled node; "
                    "the smoothing system is singular on that block"
                )
        W = instance.dense_adjacency()
        lap = np.diag(instance.degrees()) - W
        if signed:
            if instance.num_classes != 2:
                raise ValueError("signed label encoding requires a binary task")
            Y = np.zeros((instance.n, 1))
            for node, lab in instance.labels.items():
                Y[node, 0] = 1.0 if lab == 1 else -1.0
        else:
            Y = label_matrix(instance)
        prep = (np.ascontiguousarray(lap),
                instance.labeled_mask().astype(np.float64), Y)
        instance._cache[key] = prep
    return prep


def _delta_prep(instance: ProblemInstance):
    key = "solver_delta"
    prep = instance._cache.get(key)
    if prep is None:
        require_valid(instance)
        prep = (instance.dense_adjacency(), instance.degrees(), label_matrix(instance))
        instance._cache[key] = prep
    return prep


# -- dense/sparse dispatch ------------------------------------------------------


def _sweep_scores(kind: str, instance: ProblemInstance, params: np.ndarray,
                  c_const: float = DEFAULT_C_CONST, signed: bool = False) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if instance.n > DENSE_LIMIT:
        out = np.stack([_sparse_solve(kind, instance, float(p), c_const) for p in params])
        if signed:
            # one-hot and signed solves agree by linearity in Y
            out = (out[:, :, 1] - out[:, :, 0])[:, :, None]
        return out
    try:
        if kind == "alpha":
            S, Y = _alpha_prep(instance)
            F, resid = _backend.alpha_scores(S, Y, params)
        elif kind == "lambda":
            lap, mask, Y = _lambda_prep(instance, signed)
            F, resid = _backend.lambda_scores(lap, mask, Y, params)
        else:
            W, deg, Y = _delta_prep(instance)
            F, resid = _backend.delta_scores(W, deg, Y, c_const, params)
    except _backend.SingularSystemError as exc:
        raise SolverError(f"singular system signals invalid input: {exc}") from exc
    _record(resid, len(params))
    return F


def _sweep_predictions(kind: str, instance: ProblemInstance, params: np.ndarray,
                       c_const: float = DEFAULT_C_CONST) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if instance.n > DENSE_LIMIT:
        return np.stack([
            predict(_sparse_solve(kind, instance, float(p), c_const)) for p in params
        ]).astype(np.int32)
    try:
        if kind == "alpha":
            S, Y = _alpha_prep(instance)
            preds, resid = _backend.alpha_predictions(S, Y, params)
        elif kind == "lambda":
            lap, mask, Y = _lambda_prep(instance, False)
            preds, resid = _backend.lambda_predictions(lap, mask, Y, params)
        else:
            W, deg, Y = _delta_prep(instance)
            preds, resid = _backend.delta_predictions(W, deg, Y, c_const, params)
    except _backend.SingularSystemError as exc:
        raise SolverError(f"singular system signals invalid input: {exc}") from exc
    _record(resid, len(params))
    return preds


def _sparse_solve(kind: str, instance: ProblemInstance, param: float,
                  c_const: float) -> np.ndarray:
    """Conjugate-gradient path for n > DENSE_LIMIT (tol 1e-10, <= 10 n iters)."""
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    require_valid(instance)
    n = instance.n
    rows = [e[0] for e in instance.edges] + [e[1] for e in instance.edges if e[0] != e[1]]
    cols = [e[1] for e in instance.edges] + [e[0] for e in instance.edges if e[0] != e[1]]
    vals = [e[2] for e in instance.edges] + [e[2] for e in instance.edges if e[0] != e[1]]
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    deg = np.asarray(W.sum(axis=1)).ravel()
    Y = label_matrix(instance)

    if kind == "alpha":
        dinv = sp.diags(deg ** -0.5)
        A = sp.eye(n) - param * (dinv @ W @ dinv)
        B = (1.0 - param) * Y
        left = right = None
    elif kind == "lambda":
        if not instance.labels:
            raise SolverError("smoothing family needs at least one labeled node")
        A = sp.diags(deg) - W + param * sp.diags(instance.labeled_mask().astype(float))
        B = param * Y
        left = right = None
    else:
        # I - c*S is similar to I - c*S_sym via D^(dl - 1/2); solve the
        # symmetric system and transform back.
        dinv = sp.diags(deg ** -0.5)
        A = sp.eye(n) - c_const * (dinv @ W @ dinv)
        X = deg ** (param - 0.5)
        B = X[:, None] * Y
        left, right = None, 1.0 / X

    F = np.empty_like(B)
    for col in range(B.shape[1]):
        sol, info = spla.cg(A, B[:, col], rtol=1e-10, atol=0.0, maxiter=10 * n)
        if info != 0:
            raise SolverError(f"sparse solve did not converge (info={info})")
        F[:, col] = sol
    if right is not None:
        F = right[:, None] * F

    if kind == "alpha":
        dinv_arr = deg ** -0.5
        S = sp.diags(dinv_arr) @ W @ sp.diags(dinv_arr)
        resid = np.abs(F - param * (S @ F) - (1.0 - param) * Y).max()
    elif kind == "lambda":
        lapF = deg[:, None] * F - W @ F
        resid = np.abs(lapF + param * instance.labeled_mask()[:, None] * F - param * Y).max()
    else:
        scale = deg ** -param
        SF = scale[:, None] * (W @ ((deg ** (param - 1.0))[:, None] * F))
        resid = np.abs(F - c_const * SF - Y).max()
    _record(float(resid), 1)
    return F


# -- public solver entry points --------------------------------------------------


def solve_local_global(instance: ProblemInstance, alpha: float) -> ScoreMatrix:
    """F = (1-a)(I - a*S)^{-1} Y with the symmetric normalized adjacency."""
    _check_alpha(alpha)
    F = _sweep_scores("alpha", instance, np.array([alpha]))[0]
    return ScoreMatrix(F=F, family="alpha", param=float(alpha))


def solve_smoothing(instance: ProblemInstance, lam: float, *,
                    signed_labels: bool = False) -> ScoreMatrix:
    """F solves (S + lam*Delta) F = lam*Y for the unnormalized Laplacian S.

    ``signed_labels`` switches to the two-class signed encoding
    Y in {-1, 0, +1}^n (class 0 -> -1, class 1 -> +1, unlabeled -> 0) and
    returns a 1-D signed score; identical predictions to one-hot by linearity.
    """
    _check_lambda(lam)
    if signed_labels and instance.num_classes != 2:
        raise ValueError("signed label encoding requires a binary task")
    F = _sweep_scores("lambda", instance, np.array([lam]), signed=signed_labels)[0]
    if signed_labels:
        return ScoreMatrix(F=F[:, 0], family="lambda", param=float(lam))
    return ScoreMatrix(F=F, family="lambda", param=float(lam))


def solve_normalized_adj(instance: ProblemInstance, delta: float,
                         c_const: float = DEFAULT_C_CONST) -> ScoreMatrix:
    """F solves (I - c*S) F = Y with S = D^{-dl} W D^{dl-1}."""
    _check_delta(delta, c_const)
    F = _sweep_scores("delta", instance, np.array([delta]), c_const=c_const)[0]
    return ScoreMatrix(F=F, family="delta", param=float(delta))


def predict(scores) -> np.ndarray:
    """Per-node class: row argmax, ties resolved to the lowest class index.

    A 1-D score vector is treated as a signed two-class score (class 1 iff
    strictly positive, so a zero score ties to class 0).
    """
    F = scores.F if isinstance(scores, ScoreMatrix) else np.asarray(scores)
    if not np.all(np.isfinite(F)):
        raise ValueError("scores must be finite")
    if F.ndim == 1:
        return (F > 0).astype(np.int64)
    return F.argmax(axis=1)


def clamped_predictions(instance: ProblemInstance, scores) -> np.ndarray:
    """predict(), with labeled nodes pinned to their given labels.

    Label propagation only predicts the unlabeled nodes; this is the
    prediction vector loss profiles and tuning are evaluated on.
    """
    preds = np.array(predict(scores))
    for node, lab in instance.labels.items():
        preds[node] = lab
    return preds


def zero_one_loss(predictions, truth, eval_nodes=None) -> float:
    """Fraction of evaluated nodes whose prediction differs from the truth."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError("predictions and ground truth must have equal length")
    if eval_nodes is not None:
        idx = np.asarray(eval_nodes, dtype=np.int64)
        predictions = predictions[idx]
        truth = truth[idx]
    if predictions.size == 0:
        raise ValueError("evaluation set is empty")
    return float(np.mean(predictions != truth))


def margin_loss(f, y, gamma: float):
    """Margin surrogate for the two-class 0-1 loss.

    With confidence ``a = (1 - 2 f) * y`` for score ``f`` in [0, 1]
    (probability of class +1) and ``y`` in {-1, +1}:
    loss = 1 when a > 0, 1 + a/gamma when -gamma <= a <= 0, else 0.
    Upper-bounds the 0-1 loss pointwise for every gamma > 0.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = (1.0 - 2.0 * f) * y
    loss = np.where(a > 0, 1.0, np.where(a >= -gamma, 1.0 + a / gamma, 0.0))
    return float(loss) if loss.ndim == 0 else loss


# -- family abstraction -----------------------------------------------------------


@dataclass(frozen=True)
class Family:
    """One hyperparameter family: a name, a (clamped) domain, and solvers."""

    kind: str
    c_const: float = DEFAULT_C_CONST

    def __post_init__(self):
        if self.kind not in ("alpha", "lambda", "delta"):
            raise ValueError(f"unknown family {self.kind!r}")
        if self.kind == "delta" and not 0.0 < self.c_const < 1.0:
            raise ValueError(f"c_const must lie in (0, 1), got {self.c_const}")

    @property
    def domain(self) -> tuple[float, float]:
        return {"alpha": ALPHA_DOMAIN, "lambda": LAMBDA_DOMAIN, "delta": DELTA_DOMAIN}[self.kind]

    @property
    def log_scale(self) -> bool:
        """Sweeps and profiles of the unbounded lambda domain run in log space."""
        return self.kind == "lambda"

    def clamp(self, value: float) -> float:
        lo, hi = self.domain
        return min(max(value, lo), hi)

    def solve(self, instance: ProblemInstance, value: float) -> ScoreMatrix:
        if self.kind == "alpha":
            return solve_local_global(instance, value)
        if self.kind == "lambda":
            return solve_smoothing(instance, value)
        return solve_normalized_adj(instance, value, self.c_const)

    def scores(self, instance: ProblemInstance, values) -> np.ndarray:
        """Stacked (P, n, c) score matrices at the given parameter values."""
        return _sweep_scores(self.kind, instance, values, c_const=self.c_const)

    def predictions(self, instance: ProblemInstance, values,
                    clamp_labeled: bool = False) -> np.ndarray:
        """Stacked (P, n) argmax predictions at the given parameter values."""
        preds = _sweep_predictions(self.kind, instance, values, c_const=self.c_const)
        if clamp_labeled:
            preds = np.array(preds)
            for node, lab in instance.labels.items():
                preds[:, node] = lab
        return preds

    def grid(self, k: int) -> np.ndarray:
        """k domain points, uniform (log-uniform for lambda), endpoints included."""
        lo, hi = self.domain
        if self.log_scale:
            return np.exp(np.linspace(np.log(lo), np.log(hi), k))
        return np.linspace(lo, hi, k)


def get_family(kind: str, c_const: float = DEFAULT_C_CONST) -> Family:
    return Family(kind=kind, c_const=c_const)


ALPHA = Family("alpha")
LAMBDA = Family("lambda")
DELTA = Family("delta")
