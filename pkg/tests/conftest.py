import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tunelab.instances import ProblemInstance, generate_random, validate


def random_instance(seed, n_max=12, c_max=3, lambda_safe=False,
                    with_features=False, d=3):
    """A random valid instance; resamples until lambda preconditions hold."""
    rng = np.random.default_rng(seed)
    for attempt in range(200):
        n = int(rng.integers(4, n_max + 1))
        c = int(rng.integers(2, c_max + 1))
        density = float(rng.uniform(0.3, 0.9))
        fraction = float(rng.uniform(0.25, 0.6))
        inst = generate_random(int(rng.integers(0, 2 ** 31)), n, c,
                               density, fraction)
        assert validate(inst) == []
        if lambda_safe:
            ok = all(any(node in inst.labels for node in comp)
                     for comp in inst.connected_components())
            if not ok:
                continue
        if with_features:
            feats = np.random.default_rng(seed + 7).normal(size=(inst.n, d))
            inst = ProblemInstance(n=inst.n, num_classes=inst.num_classes,
                                   edges=inst.edges, labels=inst.labels,
                                   features=feats, meta=inst.meta)
        return inst
    raise AssertionError("could not draw a valid instance")


def binary_feature_instance(seed, n=12, d=3, label_fraction=0.4):
    """Planted two-cluster instance with informative features."""
    inst = generate_random(seed, n, 2, 0.6, label_fraction, planted_structure=True)
    rng = np.random.default_rng(seed + 13)
    truth = inst.truth()
    centers = np.vstack([np.ones(d), -np.ones(d)])
    feats = centers[truth] + 0.3 * rng.normal(size=(n, d))
    return ProblemInstance(n=inst.n, num_classes=2, edges=inst.edges,
                           labels=inst.labels, features=feats, meta=inst.meta)


@pytest.fixture
def alpha_gadget():
    from tunelab.gadgets import GadgetSpec, build_gadget

    return build_gadget(GadgetSpec(kind="alpha", threshold=0.75))
