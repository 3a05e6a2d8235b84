"""Rademacher-complexity bound calculators for SGC and GCAN tuning.

Both bounds have the shape ``4/m + 12 sqrt(dim * ln(base * sqrt(m) * K)) /
sqrt(m)`` with a covering-dimension factor (d+1 for SGC's d-vector
classifier, d^2+1 for GCAN's d x d shared weight) and a Lipschitz constant K
assembled from norm bounds on the inputs and parameters.  Natural log
throughout (the base of the covering logarithm is a convention; it is
recorded here so frozen regression values are reproducible).

``c_w`` (edge-weight bound) and ``c_v`` (attention-row bound) are accepted
for completeness: they belong to the boundedness assumptions but do not
enter the final constants, so the calculators ignore them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundInputs:
    """Sample count, architecture sizes, margin, and norm constants.

    SGC needs c_dl, c_dh, c_z, c_theta; GCAN needs c_dl, c_z, c_u, and the
    branching factor r.
    """

    m: int
    d: int
    L: int
    gamma: float
    c_dl: float | None = None
    c_dh: float | None = None
    c_z: float | None = None
    c_theta: float | None = None
    c_w: float | None = None
    c_u: float | None = None
    c_v: float | None = None
    r: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.d < 1 or self.L < 1:
            raise ValueError("d and L must be at least 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        for name in ("c_dl", "c_dh", "c_z", "c_theta", "c_w", "c_u", "c_v", "r"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if self.c_dl is not None and self.c_dh is not None and self.c_dl > self.c_dh:
            raise ValueError("c_dl must not exceed c_dh")

    def _need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"missing required constants: {', '.join(missing)}")


def sgc_constants(b: BoundInputs) -> tuple[float, float, float]:
    """The degree ratio k1 and the two margin-Lipschitz constants (k2, k3).

    k2 scales changes in the self-loop weight, k3 changes in theta:
    per-node margin-loss changes obey
    ``|loss - loss'| <= k2 |beta - beta'| + k3 ||theta - theta'||``.
    """
    b._need("c_dl", "c_dh", "c_z", "c_theta")
    k1 = (1.0 + b.c_dh) / b.c_dl
    if k1 == 1.0:
        raise ValueError("k1 = 1 degenerates the geometric sum; perturb the inputs")
    geom = (k1 - k1 ** b.L) / (1.0 - k1)
    k2 = (2.0 / b.gamma) * ((b.c_dl ** 2 + b.c_dh ** 2 + b.c_dh) / b.c_dl ** 3) \
        * (b.c_dh / b.c_dl) ** (b.L - 1) * b.c_z * b.c_theta * geom
    k3 = (2.0 / b.gamma) * k1 ** b.L * b.c_z
    return k1, k2, k3


def _tail(m: int, dim: float, log_arg: float) -> float:
    if log_arg <= 1.0:
        raise ValueError(
            f"covering log argument {log_arg:.6g} <= 1: inputs are outside "
            "the small-epsilon regime the bound covers")
    return 4.0 / m + 12.0 * math.sqrt(dim * math.log(log_arg)) / math.sqrt(m)


def rademacher_bound_sgc(b: BoundInputs) -> float:
    """4/m + 12 sqrt((d+1) ln(16 sqrt(m) max(k2, k3))) / sqrt(m)."""
    _, k2, k3 = sgc_constants(b)
    return _tail(b.m, b.d + 1.0, 16.0 * math.sqrt(b.m) * max(k2, k3))


def gcan_constants(b: BoundInputs) -> tuple[float, float, float, float, float, float]:
    """(k1, k2, k3, k4, A, B): layer-growth constants and the two margin
    Lipschitz coefficients A (for eta) and B (for U)."""
    b._need("c_dl", "c_z", "c_u", "r")
    grow = max(1.0, 1.0 / b.c_dl) ** (b.L - 1)
    k1 = b.r ** b.L * b.c_u ** (b.L + 1) * b.c_z * grow
    k2 = b.r ** (b.L - 1) * b.c_u ** (b.L + 1) * b.c_z * grow + 2.0 * b.r * b.c_u / b.c_dl
    k3 = (1.0 + 2.0 * b.r / b.c_dl) * b.r ** (b.L - 1) * b.c_u ** b.L * b.c_z * grow
    k4 = b.c_u + 2.0 * b.r * b.c_u / b.c_dl
    if k4 == 1.0:
        raise ValueError("k4 = 1 degenerates the geometric sum; perturb the inputs")
    A = (2.0 / b.gamma) * k2 * (k4 ** b.L - k4) / (k4 - 1.0)
    B = (2.0 * k3 * (k4 ** b.L - k4) + b.gamma * (k4 ** 2 - k4) * b.c_z) \
        / (b.gamma * (k4 - 1.0))
    return k1, k2, k3, k4, A, B


def rademacher_bound_gcan(b: BoundInputs) -> float:
    """4/m + 12 sqrt((d^2+1) ln(8 sqrt(m) max(A, B c_u sqrt(d)))) / sqrt(m)."""
    *_, A, B = gcan_constants(b)
    return _tail(b.m, b.d ** 2 + 1.0, 8.0 * math.sqrt(b.m) * max(A, B * b.c_u * math.sqrt(b.d)))


def gcan_embedding_norm_bound(level: int, r: float, c_u: float, c_z: float,
                              c_dl: float) -> float:
    """Norm cap on level-l embeddings: r^l c_u^(l+1) c_z max(1, 1/c_dl)^l.

    Valid for 1-Lipschitz activations with act(0) = 0 and c_u >= 1 (the
    extra c_u factor absorbs the level-0 feature norm).
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    return r ** level * c_u ** (level + 1) * c_z * max(1.0, 1.0 / c_dl) ** level
