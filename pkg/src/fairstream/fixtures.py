"""Benchmark fixture: the 40-member threshold family over a noisy-threshold
gaussian stream audited by a 3-member majority panel.

Labels follow a sign rule with a high-noise band around the boundary, so
the fairness-mandated smoothing (panel distances grow steeply in the
feature gap) is almost free in error terms inside the band but sharp
policies still draw reports there: accuracy and fairness stay in genuine
tension while the fair-in-hindsight comparator remains competitive, which
keeps the regret series positive at desk scale.
"""

from __future__ import annotations

import numpy as np

from .harness import RunConfig

__all__ = ["benchmark_family_spec", "benchmark_stream_spec", "benchmark_config"]


def benchmark_family_spec() -> dict:
    # 19 cutoffs x 2 polarities + 2 constants = 40 members
    return {
        "kind": "thresholds",
        "cutoffs": [round(c, 6) for c in np.linspace(-1.8, 1.8, 19)],
        "coord": 0,
        "polarities": "both",
        "constants": True,
        "dim": 1,
    }


def benchmark_stream_spec() -> dict:
    return {
        "kind": "iid-gaussian",
        "label": {
            "kind": "noisy-threshold",
            "cutoff": 0.0,
            "noise": 0.08,
            "band": 0.5,
            "band_noise": 0.45,
        },
        "scheme": {
            "panel": [
                {"kind": "offset-l1", "offset": 0.15, "weights": [1.5]},
                {"kind": "offset-l1", "offset": 0.20, "weights": [2.0]},
                {"kind": "offset-l1", "offset": 0.25, "weights": [2.5]},
            ],
            "aggregation": {"kind": "majority", "theta": 0.5},
        },
    }


def benchmark_config(mode: str = "full", T: int = 1000, b: float = 0.0, seed: int = 0) -> RunConfig:
    return RunConfig(
        mode=mode,
        T=T,
        k=2,
        alpha=0.3,
        epsilon=0.3,
        delta=0.05,
        b=b,
        seed=seed,
        family=benchmark_family_spec(),
        stream=benchmark_stream_spec(),
    )
