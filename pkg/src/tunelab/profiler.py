"""Exact piecewise-constant loss profiles over one hyperparameter.

The 0-1 loss of a label-propagation family on a fixed instance is piecewise
constant in the hyperparameter: it can change only where some node's argmax
prediction flips, and per node and class pair the number of flips is at most
n (the score gaps are degree-<=n rational polynomials of alpha/lambda, and
sums of n exponentials of delta).  The profiler exploits that finite budget:
it seeds a uniform grid, then bisects every interval whose endpoint score-gap
sign patterns disagree until the bracket is narrower than the tolerance.

Profiles are defined over *clamped* predictions: labeled nodes keep their
given labels (label propagation only predicts the unlabeled nodes), so a
sign flip at a labeled node never creates a breakpoint or a loss change.

The lambda family is profiled in log-parameter space; its tolerance is a
log-space width (roughly a relative tolerance on lambda).
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .instances import ProblemInstance
from .solvers import Family, zero_one_loss


@dataclass(frozen=True)
class ProfilerConfig:
    """Breakpoint search controls.

    tolerance: bracket width below which a breakpoint is reported as a point
        (log-space width for the lambda family).
    grid_size: initial uniform grid resolution.
    max_depth: bisection rounds before an interval is flagged unresolved.
    """

    tolerance: float = 1e-9
    grid_size: int = 256
    max_depth: int = 60

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass(frozen=True)
class FlipRecord:
    node: int
    class_from: int
    class_to: int
    location: float


@dataclass(frozen=True)
class Breakpoint:
    location: float
    records: tuple[FlipRecord, ...]
    multiplicity: int = 1


@dataclass(frozen=True)
class LossProfile:
    """Average 0-1 loss as a function of the hyperparameter.

    ``piece_losses[k]`` is the loss on the open interval between breakpoint
    k-1 and breakpoint k (with the clamped domain endpoints at the edges), so
    ``len(piece_losses) == len(breakpoints) + 1``.
    """

    family: Family
    lo: float
    hi: float
    breakpoints: tuple[Breakpoint, ...]
    piece_losses: tuple[float, ...]
    unresolved: tuple[tuple[float, float], ...] = ()
    num_instances: int = 1

    @property
    def locations(self) -> tuple[float, ...]:
        return tuple(b.location for b in self.breakpoints)

    def piece_bounds(self) -> list[tuple[float, float]]:
        cuts = [self.lo, *self.locations, self.hi]
        return list(zip(cuts[:-1], cuts[1:]))

    def loss_at(self, value: float) -> float:
        """Piece loss at the given parameter (right piece at a breakpoint)."""
        if not self.lo <= value <= self.hi:
            raise ValueError(f"parameter {value} outside [{self.lo}, {self.hi}]")
        return self.piece_losses[bisect_right(self.locations, value)]

    def flip_counts(self) -> dict[tuple[int, int, int], int]:
        """Observed flips per (node, class_low, class_high) pair."""
        counts: dict[tuple[int, int, int], int] = {}
        for bp in self.breakpoints:
            for rec in bp.records:
                j, k = sorted((rec.class_from, rec.class_to))
                key = (rec.node, j, k)
                counts[key] = counts.get(key, 0) + 1
        return counts


def score_gap(instance: ProblemInstance, family: Family, param: float,
              node: int, j: int, k: int) -> float:
    """F[node, j] - F[node, k] at the given parameter value."""
    if j == k:
        raise ValueError("score_gap needs two distinct classes")
    c = instance.num_classes
    if not (0 <= j < c and 0 <= k < c):
        raise ValueError(f"classes ({j}, {k}) out of range [0, {c})")
    if not 0 <= node < instance.n:
        raise ValueError(f"node {node} out of range [0, {instance.n})")
    F = family.scores(instance, np.array([param]))[0]
    return float(F[node, j] - F[node, k])


def evaluate_losses(instance: ProblemInstance, family: Family, values,
                    truth) -> np.ndarray:
    """Clamped 0-1 loss over all nodes at each parameter value."""
    truth = np.asarray(truth)
    preds = family.predictions(instance, values, clamp_labeled=True)
    return np.mean(preds != truth[None, :], axis=1)


# -- breakpoint search ---------------------------------------------------------


class _Evaluator:
    """Caches clamped predictions and unlabeled gap-sign patterns per point."""

    def __init__(self, instance: ProblemInstance, family: Family):
        self.instance = instance
        self.family = family
        self.unlabeled = instance.unlabeled_nodes()
        self.pairs = list(itertools.combinations(range(instance.num_classes), 2))
        self.labels = sorted(instance.labels.items())
        self.log = family.log_scale

    def to_u(self, x):
        return np.log(x) if self.log else x

    def from_u(self, u):
        return np.exp(u) if self.log else u

    def eval(self, us: np.ndarray):
        """Return (clamped preds, gap-sign rows) at each transformed point."""
        params = self.from_u(np.asarray(us, dtype=np.float64))
        F = self.family.scores(self.instance, params)
        preds = F.argmax(axis=2)
        for node, lab in self.labels:
            preds[:, node] = lab
        if len(self.unlabeled) and self.pairs:
            sub = F[:, self.unlabeled, :]
            gaps = np.stack(
                [sub[:, :, j] - sub[:, :, k] for j, k in self.pairs], axis=2
            )
            signs = np.where(gaps >= 0, 1, -1).astype(np.int8).reshape(len(params), -1)
        else:
            signs = np.zeros((len(params), 0), dtype=np.int8)
        return preds, signs


def _search_breakpoints(ev: _Evaluator, config: ProfilerConfig,
                        ulo: float, uhi: float):
    """Locate candidate flip brackets; returns (candidates, unresolved)."""
    grid = np.linspace(ulo, uhi, config.grid_size)
    preds, signs = ev.eval(grid)
    active = []
    for t in range(config.grid_size - 1):
        if not np.array_equal(signs[t], signs[t + 1]):
            active.append((grid[t], grid[t + 1], preds[t], signs[t],
                           preds[t + 1], signs[t + 1]))
    candidates = []  # (u_lo, u_hi, preds_lo, preds_hi)
    depth = 0
    while active and depth < config.max_depth:
        mids = np.array([0.5 * (a + b) for a, b, *_ in active])
        mpreds, msigns = ev.eval(mids)
        nxt = []
        for idx, (a, b, pa, sa, pb, sb) in enumerate(active):
            m, pm, sm = mids[idx], mpreds[idx], msigns[idx]
            for lo, hi, plo, slo, phi, shi in ((a, m, pa, sa, pm, sm),
                                               (m, b, pm, sm, pb, sb)):
                if np.array_equal(slo, shi):
                    continue
                if hi - lo < config.tolerance:
                    candidates.append((lo, hi, plo, phi))
                else:
                    nxt.append((lo, hi, plo, slo, phi, shi))
        active = nxt
        depth += 1
    unresolved = [(ev.from_u(a), ev.from_u(b)) for a, b, *_ in active]
    candidates.sort(key=lambda c: c[0])
    return candidates, unresolved


def _merge_candidates(ev: _Evaluator, config: ProfilerConfig, candidates):
    """Cluster candidates within tolerance; keep clusters with a net flip."""
    breakpoints = []
    i = 0
    while i < len(candidates):
        j = i
        while (j + 1 < len(candidates)
               and candidates[j + 1][0] - candidates[j][1] <= config.tolerance):
            j += 1
        u_lo, u_hi = candidates[i][0], candidates[j][1]
        preds_lo, preds_hi = candidates[i][2], candidates[j][3]
        loc = ev.from_u(0.5 * (u_lo + u_hi))
        flips = np.nonzero(preds_lo != preds_hi)[0]
        if len(flips):
            records = tuple(
                FlipRecord(node=int(node), class_from=int(preds_lo[node]),
                           class_to=int(preds_hi[node]), location=float(loc))
                for node in flips
            )
            breakpoints.append(Breakpoint(location=float(loc), records=records,
                                          multiplicity=j - i + 1))
        i = j + 1
    return breakpoints


def profile(instance_or_set, family: Family, config: ProfilerConfig | None = None,
            truth=None) -> LossProfile:
    """Recover the exact loss-vs-parameter profile.

    Accepts a single instance or a sequence of instances (the profile of the
    mean loss; breakpoints are the union of the per-instance ones).  ``truth``
    defaults to each instance's ``meta['truth']``.
    """
    config = config or ProfilerConfig()
    if isinstance(instance_or_set, ProblemInstance):
        return _profile_one(instance_or_set, family, config, truth)
    instances = list(instance_or_set)
    if not instances:
        raise ValueError("need at least one instance")
    truths = truth if truth is not None else [None] * len(instances)
    if len(truths) != len(instances):
        raise ValueError("one truth assignment per instance required")
    parts = parallel_map(
        lambda pair: _profile_one(pair[0], family, config, pair[1]),
        list(zip(instances, truths)),
    )
    return merge_profiles(parts, config)


def _profile_one(instance: ProblemInstance, family: Family,
                 config: ProfilerConfig, truth=None) -> LossProfile:
    truth = instance.truth() if truth is None else np.asarray(truth)
    if truth.shape != (instance.n,):
        raise ValueError("truth must assign one class per node")
    ev = _Evaluator(instance, family)
    lo, hi = family.domain
    candidates, unresolved = _search_breakpoints(ev, config, ev.to_u(lo), ev.to_u(hi))
    breakpoints = _merge_candidates(ev, config, candidates)

    cuts = [lo, *(b.location for b in breakpoints), hi]
    losses = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ua, ub = ev.to_u(a), ev.to_u(b)
        pad = min(0.25 * (ub - ua), max(config.tolerance, 1e-3 * (ub - ua)))
        probes = np.array([ua + pad, 0.5 * (ua + ub), ub - pad])
        preds, _ = ev.eval(probes)
        if not (np.array_equal(preds[0], preds[1]) and np.array_equal(preds[1], preds[2])):
            unresolved.append((a, b))
        losses.append(zero_one_loss(preds[1], truth))
    return LossProfile(
        family=family, lo=lo, hi=hi,
        breakpoints=tuple(breakpoints),
        piece_losses=tuple(losses),
        unresolved=tuple(unresolved),
        num_instances=1,
    )


def merge_profiles(parts: list[LossProfile], config: ProfilerConfig | None = None) -> LossProfile:
    """Union the breakpoints of per-instance profiles; average piece losses."""
    config = config or ProfilerConfig()
    if not parts:
        raise ValueError("need at least one profile")
    fam = parts[0].family
    if any(p.family != fam for p in parts):
        raise ValueError("profiles come from different families")
    if len(parts) == 1:
        return parts[0]
    log = fam.log_scale

    def to_u(x):
        return np.log(x) if log else x

    events = sorted(
        ((bp, p) for p in parts for bp in p.breakpoints),
        key=lambda e: e[0].location,
    )
    merged: list[Breakpoint] = []
    i = 0
    while i < len(events):
        j = i
        while (j + 1 < len(events)
               and to_u(events[j + 1][0].location) - to_u(events[j][0].location)
               <= config.tolerance):
            j += 1
        group = [e[0] for e in events[i:j + 1]]
        loc = 0.5 * (group[0].location + group[-1].location)
        records = tuple(rec for bp in group for rec in bp.records)
        merged.append(Breakpoint(location=float(loc), records=records,
                                 multiplicity=sum(b.multiplicity for b in group)))
        i = j + 1

    cuts = [parts[0].lo, *(b.location for b in merged), parts[0].hi]
    losses = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = float(np.exp(0.5 * (np.log(a) + np.log(b)))) if log else 0.5 * (a + b)
        losses.append(float(np.mean([p.loss_at(mid) for p in parts])))
    return LossProfile(
        family=fam, lo=parts[0].lo, hi=parts[0].hi,
        breakpoints=tuple(merged),
        piece_losses=tuple(losses),
        unresolved=tuple(iv for p in parts for iv in p.unresolved),
        num_instances=sum(p.num_instances for p in parts),
    )


# -- reference oracle -----------------------------------------------------------


def dense_sweep_oracle(instance: ProblemInstance, family: Family, grid_size: int,
                       truth=None) -> list[tuple[float, float]]:
    """Loss at each uniform (log-uniform for lambda) grid point by full solve.

    Test reference only: no breakpoint logic, one solve per grid point.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    truth = instance.truth() if truth is None else np.asarray(truth)
    params = family.grid(grid_size)
    losses = evaluate_losses(instance, family, params, truth)
    return [(float(p), float(l)) for p, l in zip(params, losses)]


def sweep_flip_counts(instance: ProblemInstance, family: Family,
                      grid_size: int) -> dict[tuple[int, int, int], int]:
    """Per (node, class_low, class_high) prediction-change counts on a grid.

    Counts raw argmax transitions for every node (labeled included), which
    the root-counting bounds cap at n per node and class pair.
    """
    params = family.grid(grid_size)
    preds = family.predictions(instance, params)
    counts: dict[tuple[int, int, int], int] = {}
    changed = preds[1:] != preds[:-1]
    for t, node in zip(*np.nonzero(changed)):
        j, k = int(preds[t, node]), int(preds[t + 1, node])
        key = (int(node), min(j, k), max(j, k))
        counts[key] = counts.get(key, 0) + 1
    return counts


# -- CSV export -------------------------------------------------------------------


def export_profile_csv(prof: LossProfile, pieces_path, breakpoints_path) -> None:
    """Write `piece_lo, piece_hi, loss` and `breakpoint, node, class_j, class_k`."""
    with open(pieces_path, "w", encoding="utf-8") as fh:
        fh.write("piece_lo,piece_hi,loss\n")
        for (a, b), loss in zip(prof.piece_bounds(), prof.piece_losses):
            fh.write(f"{a:.17g},{b:.17g},{loss:.17g}\n")
    with open(breakpoints_path, "w", encoding="utf-8") as fh:
        fh.write("breakpoint,node,class_j,class_k\n")
        for bp in prof.breakpoints:
            for rec in bp.records:
                fh.write(f"{bp.location:.17g},{rec.node},{rec.class_from},{rec.class_to}\n")
