"""Multi-instance ERM over a hyperparameter family.

Empirical risk is the per-instance mean 0-1 loss averaged uniformly over
instances (identical to the joint 1/(mn) normalization when every instance
has the same n, and well defined when sizes differ).  Exact mode unions the
instances' loss-profile breakpoints and scans every cell midpoint plus the
clamped domain endpoints, so no grid of any resolution can beat it; grid
mode scans k uniform (log-uniform for lambda) points.

``sample_size`` instantiates the uniform-convergence sample bound
m = ceil((log2 n + ln(1/failure_probability)) / epsilon^2): a log2 n capacity
estimate for one-parameter label-propagation families plus the confidence
term, with the asymptotic constant fixed to 1 (recorded in the plan notes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .instances import ProblemInstance, generate_random
from .profiler import LossProfile, ProfilerConfig, evaluate_losses, profile
from .solvers import Family


@dataclass(frozen=True)
class TuneResult:
    """Outcome of one ERM run."""

    family: Family
    best_param: float
    best_loss: float
    per_instance_losses: tuple[float, ...]
    candidates: tuple[float, ...]
    mode: str
    warnings: tuple[str, ...] = ()


def _resolve_truths(instances, truths):
    if truths is None:
        return [inst.truth() for inst in instances]
    if len(truths) != len(instances):
        raise ValueError("one truth assignment per instance required")
    return [np.asarray(t) for t in truths]


def _mean_losses_at(instances, family, params, truths) -> np.ndarray:
    per_inst = parallel_map(
        lambda pair: evaluate_losses(pair[0], family, params, pair[1]),
        list(zip(instances, truths)),
    )
    return np.mean(np.stack(per_inst), axis=0)


def erm_tune(instances, family: Family, mode: str = "exact",
             grid_size: int = 1024, truths=None,
             config: ProfilerConfig | None = None) -> TuneResult:
    """Pick the parameter minimizing mean 0-1 loss across instances.

    mode="exact" enumerates breakpoint cells; mode="grid" scans ``grid_size``
    points.  Ties resolve to the smallest parameter value.  Unresolved
    profiler intervals surface as warnings on the result.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one instance")
    truths = _resolve_truths(instances, truths)
    lo, hi = family.domain

    warnings: list[str] = []
    if mode == "exact":
        config = config or ProfilerConfig()
        profiles: list[LossProfile] = parallel_map(
            lambda pair: profile(pair[0], family, config, truth=pair[1]),
            list(zip(instances, truths)),
        )
        for k, prof in enumerate(profiles):
            for a, b in prof.unresolved:
                warnings.append(f"instance {k}: unresolved interval ({a}, {b})")
        cuts = sorted({loc for prof in profiles for loc in prof.locations})
        bounds = [lo, *cuts, hi]
        if family.log_scale:
            mids = [float(np.exp(0.5 * (np.log(a) + np.log(b))))
                    for a, b in zip(bounds[:-1], bounds[1:])]
        else:
            mids = [0.5 * (a + b) for a, b in zip(bounds[:-1], bounds[1:])]
        candidates = np.array(sorted({lo, hi, *mids}))
        # Cell midpoints read off the exact per-instance profiles; endpoints
        # may sit within tolerance of a breakpoint, so solve those directly.
        mean_losses = np.empty(len(candidates))
        for idx, cand in enumerate(candidates):
            if cand == lo or cand == hi:
                mean_losses[idx] = _mean_losses_at(
                    instances, family, np.array([cand]), truths)[0]
            else:
                mean_losses[idx] = float(np.mean(
                    [prof.loss_at(cand) for prof in profiles]))
    elif mode == "grid":
        candidates = family.grid(grid_size)
        mean_losses = _mean_losses_at(instances, family, candidates, truths)
    else:
        raise ValueError(f"mode must be 'exact' or 'grid', got {mode!r}")

    best_idx = int(np.argmin(mean_losses))  # first minimum = smallest parameter
    best_param = float(candidates[best_idx])
    per_losses = _per_instance_losses(instances, family, best_param, truths)
    return TuneResult(
        family=family,
        best_param=best_param,
        best_loss=float(np.mean(per_losses)),
        per_instance_losses=tuple(per_losses),
        candidates=tuple(float(x) for x in candidates),
        mode=mode,
        warnings=tuple(warnings),
    )


def _per_instance_losses(instances, family, param, truths) -> list[float]:
    losses = parallel_map(
        lambda pair: float(evaluate_losses(pair[0], family, np.array([param]), pair[1])[0]),
        list(zip(instances, truths)),
    )
    return losses


# -- sample-size accounting ---------------------------------------------------------


@dataclass(frozen=True)
class SampleSizePlan:
    n: int
    epsilon: float
    failure_probability: float
    pdim_estimate: float
    m: int
    notes: str = ("m = ceil((log2 n + ln(1/failure_probability)) / epsilon^2); "
                  "asymptotic constant fixed to 1 by convention")


def sample_size(n: int, epsilon: float, failure_probability: float) -> SampleSizePlan:
    """Instances needed to tune within epsilon at the given confidence."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < failure_probability < 1:
        raise ValueError(
            f"failure_probability must lie in (0, 1), got {failure_probability}")
    pdim = math.log2(n)
    m = math.ceil((pdim + math.log(1.0 / failure_probability)) / epsilon ** 2)
    return SampleSizePlan(n=n, epsilon=epsilon,
                          failure_probability=failure_probability,
                          pdim_estimate=pdim, m=max(1, m))


# -- synthetic generalization experiment ----------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Arguments forwarded to :func:`tunelab.instances.generate_random`."""

    n: int = 30
    num_classes: int = 2
    edge_density: float = 0.5
    label_fraction: float = 0.2
    planted_structure: bool = True

    def draw(self, seed: int) -> ProblemInstance:
        return generate_random(seed=seed, n=self.n, num_classes=self.num_classes,
                               edge_density=self.edge_density,
                               label_fraction=self.label_fraction,
                               planted_structure=self.planted_structure)


def generalization_experiment(gen: GeneratorConfig, family: Family,
                              m_train: int, m_test: int, seed: int,
                              mode: str = "exact", test_seed: int | None = None,
                              grid_size: int = 1024) -> dict:
    """Tune on fresh training instances, evaluate the tuned value on test ones.

    Instance k of the training set uses generator seed ``seed + k``; the test
    set starts at ``test_seed`` (default ``seed + m_train``, so the sets are
    disjoint; pass ``test_seed=seed`` to evaluate on the identical set).
    Deterministic for fixed arguments.
    """
    if m_train < 1 or m_test < 1:
        raise ValueError("m_train and m_test must be positive")
    if test_seed is None:
        test_seed = seed + m_train
    train = [gen.draw(seed + k) for k in range(m_train)]
    test = [gen.draw(test_seed + k) for k in range(m_test)]
    result = erm_tune(train, family, mode=mode, grid_size=grid_size)
    test_truths = [inst.truth() for inst in test]
    test_losses = _per_instance_losses(test, family, result.best_param, test_truths)
    test_loss = float(np.mean(test_losses))
    return {
        "family": family.kind,
        "c_const": family.c_const if family.kind == "delta" else None,
        "mode": mode,
        "seed": int(seed),
        "test_seed": int(test_seed),
        "m_train": int(m_train),
        "m_test": int(m_test),
        "best_param": result.best_param,
        "train_loss": result.best_loss,
        "test_loss": test_loss,
        "gap": abs(result.best_loss - test_loss),
        "warnings": list(result.warnings),
    }
