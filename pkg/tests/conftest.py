import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybrid_unary.dataset import load_manifest, prepare  # noqa: E402
from hybrid_unary.models import (FixedPointConfig, Pow2Config, fit_baseline,  # noqa: E402
                                 infer_topology, input_levels, pow2_retrain, to_hybrid)

ROOT = Path(__file__).resolve().parents[1]
MANIFESTS = ROOT / "data" / "manifests"
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def balance():
    """Balance Scale trained through every variant at seed 0."""
    snap = prepare(load_manifest(MANIFESTS / "balance_scale.json"), 0)
    ds = snap.dataset
    fx = FixedPointConfig()
    lv = input_levels(ds.features, fx)
    fit, val = (np.asarray(i) for i in snap.split.validation_holdout())
    topo = infer_topology(4, 3, 21)
    fm, base = fit_baseline(lv[fit], ds.labels[fit], lv[val], ds.labels[val], topo, fx, seed=0)
    hyb = to_hybrid(base)
    p2, stats = pow2_retrain(hyb, lv[fit], ds.labels[fit], lv[val], ds.labels[val],
                             Pow2Config(), 0)
    return {"snap": snap, "levels": lv, "float": fm, "baseline": base, "hybrid": hyb,
            "pow2": p2, "stats": stats, "fit": fit, "val": val}
