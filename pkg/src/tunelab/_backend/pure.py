"""NumPy implementation of the parameter-sweep kernels.

Each function solves the linear system of one label-propagation family at
many parameter values and returns either the full score matrices or just the
per-node argmax predictions.  Systems are solved by dense LU with partial
pivoting (``numpy.linalg.solve`` over a stacked batch); when the backward
residual of a solve exceeds ``RESIDUAL_LIMIT`` the solution is polished with
iterative refinement.

The compiled backend in ``_core.pyx`` mirrors these signatures exactly.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"

RESIDUAL_LIMIT = 1e-8
_REFINE_STEPS = 3

# Cap on the number of stacked n x n systems materialised at once.
_CHUNK_BUDGET = 4_000_000


class SingularSystemError(RuntimeError):
    """The family's linear system was numerically singular."""


def _chunk_size(n: int) -> int:
    return max(1, _CHUNK_BUDGET // max(1, n * n))


def _solve_batch(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve stacked systems A[k] F[k] = B[k]; refine until residuals pass."""
    try:
        F = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(F)):
        raise SingularSystemError("non-finite solution entries")
    resid = np.abs(A @ F - B).max(axis=(1, 2)) if B.ndim == 3 else np.abs(A @ F - B).max()
    for _ in range(_REFINE_STEPS):
        bad = resid > RESIDUAL_LIMIT
        if not np.any(bad):
            break
        idx = np.nonzero(bad)[0]
        r = B[idx] - A[idx] @ F[idx]
        F[idx] += np.linalg.solve(A[idx], r)
        resid[idx] = np.abs(A[idx] @ F[idx] - B[idx]).max(axis=(1, 2))
    worst = float(resid.max())
    if worst > RESIDUAL_LIMIT:
        raise SingularSystemError(
            f"residual {worst:.3e} after refinement; system is effectively singular")
    return F, worst


def _alpha_systems(S: np.ndarray, Y: np.ndarray, params: np.ndarray):
    n = S.shape[0]
    eye = np.eye(n)
    A = eye[None, :, :] - params[:, None, None] * S[None, :, :]
    B = (1.0 - params)[:, None, None] * Y[None, :, :]
    return A, B


def _lambda_systems(lap: np.ndarray, labeled: np.ndarray, Y: np.ndarray, params: np.ndarray):
    delta = np.diag(labeled.astype(float))
    A = lap[None, :, :] + params[:, None, None] * delta[None, :, :]
    B = params[:, None, None] * Y[None, :, :]
    return A, B


def _delta_systems(W: np.ndarray, deg: np.ndarray, Y: np.ndarray, c_const: float, params: np.ndarray):
    n = W.shape[0]
    logd = np.log(deg)
    base = c_const * (W / deg[None, :])  # c * W_ij / d_j
    expo = logd[None, :] - logd[:, None]  # ln d_j - ln d_i
    A = -base[None, :, :] * np.exp(params[:, None, None] * expo[None, :, :])
    diag = 1.0 - c_const * np.diag(W) / deg
    A[:, np.arange(n), np.arange(n)] = diag[None, :]
    B = np.broadcast_to(Y, (len(params),) + Y.shape).copy()
    return A, B


def _sweep(build, args, Y, params, want_scores):
    params = np.asarray(params, dtype=np.float64)
    flat = params.ravel()
    n, c = Y.shape
    chunk = _chunk_size(n)
    scores = np.empty((flat.size, n, c)) if want_scores else None
    preds = None if want_scores else np.empty((flat.size, n), dtype=np.int32)
    max_resid = 0.0
    for start in range(0, flat.size, chunk):
        sub = flat[start:start + chunk]
        A, B = build(*args, sub)
        F, resid = _solve_batch(A, B)
        max_resid = max(max_resid, resid)
        if want_scores:
            scores[start:start + chunk] = F
        else:
            preds[start:start + chunk] = F.argmax(axis=2)
    out = scores if want_scores else preds
    return out, max_resid


def alpha_scores(S, Y, params):
    return _sweep(_alpha_systems, (S, Y), Y, params, True)


def alpha_predictions(S, Y, params):
    return _sweep(_alpha_systems, (S, Y), Y, params, False)


def lambda_scores(lap, labeled, Y, params):
    return _sweep(_lambda_systems, (lap, labeled, Y), Y, params, True)


def lambda_predictions(lap, labeled, Y, params):
    return _sweep(_lambda_systems, (lap, labeled, Y), Y, params, False)


def delta_scores(W, deg, Y, c_const, params):
    return _sweep(_delta_systems, (W, deg, Y, c_const), Y, params, True)


def delta_predictions(W, deg, Y, c_const, params):
    return _sweep(_delta_systems, (W, deg, Y, c_const), Y, params, False)
