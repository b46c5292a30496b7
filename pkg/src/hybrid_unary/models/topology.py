from __future__ import annotations

from dataclasses import dataclass


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Single-hidden-layer MLP shape: inputs -> hidden -> classes."""

    inputs: int
    hidden: int
    classes: int

    def __post_init__(self):
        if min(self.inputs, self.hidden, self.classes) < 1:
            raise TopologyError(f"all layer sizes must be >= 1: {self}")

    @property
    def mac_count(self) -> int:
        return self.inputs * self.hidden + self.hidden * self.classes


def infer_topology(inputs: int, classes: int, mac_count: int) -> Topology:
    """Solve ``I*H + H*C = macs`` for the hidden width H."""
    per_hidden = inputs + classes
    if mac_count <= 0 or mac_count % per_hidden:
        raise TopologyError(
            f"{mac_count} MACs is not a multiple of inputs+classes={per_hidden}; "
            "give the hidden width explicitly"
        )
    return Topology(inputs, mac_count // per_hidden, classes)


# (inputs, classes, MAC count) of the six reference classifiers
REFERENCE_SHAPES = {
    "cardio": (21, 3, 72),
    "redwine": (11, 6, 34),
    "whitewine": (11, 7, 72),
    "seeds": (7, 3, 30),
    "vertebral_3c": (6, 3, 27),
    "balance_scale": (4, 3, 21),
}

# baseline test accuracy (%) reported for the exact binary designs
REFERENCE_ACCURACY = {
    "cardio": 88.6,
    "redwine": 57.1,
    "whitewine": 54.2,
    "seeds": 88.9,
    "vertebral_3c": 77.4,
    "balance_scale": 84.6,
}
