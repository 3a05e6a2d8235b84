"""Four-node gadget constructions with analytically known flip thresholds.

Each gadget is a single connected component whose one unlabeled node ``u``
switches its prediction exactly once as the family parameter sweeps its
domain, at a location chosen at construction time:

* alpha: a hub labeled class 0 joined to two class-1 leaves (weight 1) and to
  ``u`` (weight x).  The flip sits at ``sqrt(x + 2) / 2``; a designed
  threshold t in (1/sqrt(2), 1) gives ``x = 4 t^2 - 2``.
* lambda: ``u`` joined to two class-0 leaves (weight 1) and to a class-1 node
  (weight x).  Flip at ``x / (x - 2)``; a threshold t > 1 gives
  ``x = 2 t / (t - 1)``.
* delta: same graph as alpha with the class roles swapped (hub class 1,
  leaves class 0), so that ``u`` again predicts class 0 below the flip.
  Flip at ``ln(2c) / ln(x + 2)``; a threshold t gives ``x = (2c)^{1/t} - 2``,
  which is positive only when ``c > 1/2`` and ``t < ln(2c)/ln(2)``.

Every gadget predicts class 0 strictly below its threshold and class 1 above
it.  Disjoint unions of gadgets with ascending thresholds and alternating
ground truth make the loss oscillate between two levels; binary-counting
subsets of a threshold ladder then realize all 2^m sign patterns against
per-instance witnesses (the executable shattering certificate).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .instances import ProblemInstance, TunelabError, disjoint_union
from .instances import from_json_dict, to_json_dict
from .profiler import evaluate_losses
from .solvers import DEFAULT_C_CONST, Family, get_family


class GadgetError(TunelabError):
    """A gadget is outside its validity range or failed verification."""


@dataclass(frozen=True)
class GadgetSpec:
    """Family tag, designed flip threshold, and the derived edge weight."""

    kind: str
    threshold: float
    c_const: float = DEFAULT_C_CONST

    def __post_init__(self):
        if self.kind not in ("alpha", "lambda", "delta"):
            raise GadgetError(f"unknown gadget family {self.kind!r}")
        self.validate()

    @property
    def x(self) -> float:
        t = self.threshold
        if self.kind == "alpha":
            return 4.0 * t * t - 2.0
        if self.kind == "lambda":
            return 2.0 * t / (t - 1.0)
        return (2.0 * self.c_const) ** (1.0 / t) - 2.0

    def validate(self) -> None:
        t = self.threshold
        if self.kind == "alpha":
            if not (1.0 / math.sqrt(2.0) < t < 1.0):
                raise GadgetError(
                    f"alpha threshold must lie in (1/sqrt(2), 1) so the edge "
                    f"weight 4t^2 - 2 is positive; got {t}"
                )
        elif self.kind == "lambda":
            if not t > 1.0:
                raise GadgetError(f"lambda threshold must exceed 1, got {t}")
        else:
            c = self.c_const
            if not c > 0.5:
                raise GadgetError(
                    f"delta gadget needs c_const > 1/2 (got {c}): "
                    "otherwise (2c)^(1/t) - 2 is negative for every t"
                )
            lo, hi = admissible_range("delta", c)
            if not lo < t < hi:
                raise GadgetError(
                    f"delta threshold must lie in ({lo:.6g}, {hi:.6g}) for "
                    f"c_const={c} so the edge weight (2c)^(1/t) - 2 is "
                    f"positive; got {t}"
                )


def admissible_range(kind: str, c_const: float = DEFAULT_C_CONST) -> tuple[float, float]:
    """Open interval of designed thresholds that give a positive edge weight."""
    if kind == "alpha":
        return (1.0 / math.sqrt(2.0), 1.0)
    if kind == "lambda":
        return (1.0, math.inf)
    if kind == "delta":
        if c_const <= 0.5:
            return (0.0, 0.0)
        return (0.0, min(1.0, math.log(2.0 * c_const) / math.log(2.0)))
    raise GadgetError(f"unknown gadget family {kind!r}")


def build_gadget(spec: GadgetSpec, u_truth: int = 0) -> ProblemInstance:
    """One 4-node gadget; ``meta['truth']`` assigns ``u_truth`` to node u."""
    x = spec.x
    if not x > 0:
        raise GadgetError(f"derived edge weight {x} must be positive")
    if u_truth not in (0, 1):
        raise ValueError("u_truth must be 0 or 1")
    if spec.kind == "lambda":
        edges = ((0, 2, 1.0), (1, 2, 1.0), (2, 3, x))
        labels = {0: 0, 1: 0, 3: 1}
        u = 2
    else:
        edges = ((0, 1, 1.0), (0, 2, 1.0), (0, 3, x))
        labels = {0: 0, 1: 1, 2: 1} if spec.kind == "alpha" else {0: 1, 1: 0, 2: 0}
        u = 3
    truth = [0, 0, 0, 0]
    for node, lab in labels.items():
        truth[node] = lab
    truth[u] = u_truth
    meta = {
        "truth": truth,
        "gadget": {
            "family": spec.kind,
            "threshold": spec.threshold,
            "x": x,
            "u": u,
            "c_const": spec.c_const if spec.kind == "delta" else None,
        },
    }
    return ProblemInstance(n=4, num_classes=2, edges=edges, labels=labels, meta=meta)


def _family_for(kind: str, c_const: float) -> Family:
    return get_family(kind, c_const) if kind == "delta" else get_family(kind)


def verify_flip(instance: ProblemInstance, family: Family, tol: float = 1e-6,
                sweep_points: int = 1000) -> float:
    """Measure the flip location of the gadget's unlabeled node by bisection.

    A dense sweep first certifies the flip is unique; zero or multiple flips
    raise :class:`GadgetError`.  The returned location is accurate to ``tol``
    in parameter space.
    """
    unlabeled = instance.unlabeled_nodes()
    if len(unlabeled) != 1:
        raise GadgetError(f"gadget must have exactly one unlabeled node, got {len(unlabeled)}")
    u = int(unlabeled[0])
    grid = family.grid(sweep_points)
    preds = family.predictions(instance, grid)[:, u]
    change = np.nonzero(preds[1:] != preds[:-1])[0]
    if len(change) != 1:
        raise GadgetError(
            f"expected exactly one prediction flip of node {u} across the "
            f"domain, found {len(change)}"
        )
    lo, hi = float(grid[change[0]]), float(grid[change[0] + 1])
    plo = int(preds[change[0]])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        pm = int(family.predictions(instance, np.array([mid]))[0, u])
        if pm == plo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_alternating(kind: str, thresholds, c_const: float = DEFAULT_C_CONST
                      ) -> tuple[ProblemInstance, float]:
    """Disjoint union of gadgets whose loss alternates between two levels.

    Ground truth on the unlabeled nodes alternates 0, 1, 0, ... in ascending
    threshold order, so the loss steps up then down by 1/(4k) as the
    parameter crosses each threshold.  Returns the instance and the witness
    ``(l_min + l_max) / 2``.
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise GadgetError("need at least one threshold")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise GadgetError("thresholds must be strictly increasing")
    parts = [
        build_gadget(GadgetSpec(kind=kind, threshold=t, c_const=c_const), u_truth=g % 2)
        for g, t in enumerate(thresholds)
    ]
    inst = disjoint_union(parts)
    k = len(thresholds)
    l_min = (k // 2) / (4.0 * k)
    l_max = (k // 2 + 1) / (4.0 * k)
    witness = 0.5 * (l_min + l_max)
    u_nodes = [4 * g + p.meta["gadget"]["u"] for g, p in enumerate(parts)]
    inst.meta["alternating"] = {
        "family": kind,
        "c_const": c_const if kind == "delta" else None,
        "thresholds": thresholds,
        "witness": witness,
        "loss_levels": [l_min, l_max],
        "u_nodes": u_nodes,
    }
    return inst, witness


@dataclass(frozen=True)
class ShatterFamily:
    """m instances plus a threshold ladder realizing all 2^m sign patterns."""

    kind: str
    c_const: float
    m: int
    ladder: tuple[float, ...]
    instances: tuple[ProblemInstance, ...]
    witnesses: tuple[float, ...]

    @property
    def family(self) -> Family:
        return _family_for(self.kind, self.c_const)


_LADDER_WINDOW = {
    "alpha": (0.72, 0.97),
    "lambda": (1.25, 8.0),
}


def _ladder(kind: str, m: int, c_const: float) -> list[float]:
    count = 2 ** m - 1
    if kind == "delta":
        if not 0.9 <= c_const <= 0.999:
            raise GadgetError(
                "delta shattering needs c_const in [0.9, 0.999] so the "
                "admissible threshold window is wide enough"
            )
        hi = math.log(2.0 * c_const) / math.log(2.0) - 0.02
        window = (0.15, hi)
    else:
        window = _LADDER_WINDOW[kind]
    ladder = list(np.linspace(window[0], window[1], count + 2)[1:-1])
    # Distinct thresholds give distinct weights for all three families; the
    # jitter loop guards the reporting contract anyway.
    for _ in range(8):
        xs = [GadgetSpec(kind=kind, threshold=t, c_const=c_const).x for t in ladder]
        close = [i for i in range(len(xs) - 1) if abs(xs[i + 1] - xs[i]) < 1e-12]
        if not close:
            break
        for i in close:
            ladder[i + 1] += 1e-4
    return ladder


def build_shatter_family(kind: str, m: int, c_const: float = DEFAULT_C_CONST
                         ) -> ShatterFamily:
    """Construct the m-instance shattering certificate for a family.

    The ladder has 2^m - 1 thresholds t_1 < ... < t_{2^m - 1}.  Instance i
    (1-indexed) is the alternating instance over the thresholds whose ladder
    index is a multiple of 2^(m-i) -- the positions where bit i (counted from
    the most significant) flips while counting 0 .. 2^m - 1 in binary.  In
    ladder cell j the loss of instance i then sits above its witness exactly
    when bit i of j is one.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    ladder = _ladder(kind, m, c_const)
    instances = []
    witnesses = []
    for i in range(1, m + 1):
        step = 2 ** (m - i)
        picks = [ladder[k * step - 1] for k in range(1, 2 ** i)]
        inst, w = build_alternating(kind, picks, c_const=c_const)
        instances.append(inst)
        witnesses.append(w)
    return ShatterFamily(kind=kind, c_const=c_const, m=m, ladder=tuple(ladder),
                         instances=tuple(instances), witnesses=tuple(witnesses))


@dataclass(frozen=True)
class ShatterReport:
    passed: bool
    achieved: tuple[tuple[int, ...], ...]
    missing: tuple[tuple[int, ...], ...]
    cell_patterns: tuple[tuple[int, ...], ...]
    cell_params: tuple[float, ...]


def verify_shattering(fam: ShatterFamily) -> ShatterReport:
    """Check that every sign pattern in {0,1}^m is realized at some ladder cell.

    Evaluates each instance's clamped loss at every cell midpoint and compares
    with its witness; the report enumerates achieved and missing patterns.
    """
    family = fam.family
    lo, hi = family.domain
    cuts = [lo, *fam.ladder, hi]
    if family.log_scale:
        mids = [float(np.exp(0.5 * (np.log(a) + np.log(b))))
                for a, b in zip(cuts[:-1], cuts[1:])]
    else:
        mids = [0.5 * (a + b) for a, b in zip(cuts[:-1], cuts[1:])]
    mids_arr = np.asarray(mids)

    def losses_for(inst: ProblemInstance) -> np.ndarray:
        return evaluate_losses(inst, family, mids_arr, inst.truth())

    per_instance = parallel_map(losses_for, fam.instances)
    patterns = []
    for cell in range(len(mids)):
        bits = tuple(
            1 if per_instance[i][cell] > fam.witnesses[i] else 0
            for i in range(fam.m)
        )
        patterns.append(bits)
    achieved = sorted(set(patterns))
    wanted = {tuple((j >> (fam.m - 1 - b)) & 1 for b in range(fam.m))
              for j in range(2 ** fam.m)}
    missing = sorted(wanted - set(achieved))
    return ShatterReport(
        passed=not missing,
        achieved=tuple(achieved),
        missing=tuple(missing),
        cell_patterns=tuple(patterns),
        cell_params=tuple(float(x) for x in mids),
    )


# -- serialization ----------------------------------------------------------------


def save_shatter_family(fam: ShatterFamily, directory) -> None:
    """Instances in the standard JSON schema plus a sidecar description."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for idx, inst in enumerate(fam.instances, start=1):
        name = f"instance_{idx:02d}.json"
        names.append(name)
        with open(os.path.join(directory, name), "w", encoding="utf-8") as fh:
            json.dump(to_json_dict(inst), fh, allow_nan=False, indent=1)
            fh.write("\n")
    sidecar = {
        "family": fam.kind,
        "c_const": fam.c_const,
        "m": fam.m,
        "thresholds": list(fam.ladder),
        "witnesses": list(fam.witnesses),
        "instances": names,
        "truth": {name: inst.meta["truth"] for name, inst in zip(names, fam.instances)},
    }
    with open(os.path.join(directory, "shatter.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, allow_nan=False, indent=1)
        fh.write("\n")


def load_shatter_family(directory) -> ShatterFamily:
    with open(os.path.join(directory, "shatter.json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    instances = []
    for name in sidecar["instances"]:
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            instances.append(from_json_dict(json.load(fh)))
    return ShatterFamily(
        kind=sidecar["family"],
        c_const=sidecar["c_const"],
        m=sidecar["m"],
        ladder=tuple(sidecar["thresholds"]),
        instances=tuple(instances),
        witnesses=tuple(sidecar["witnesses"]),
    )
