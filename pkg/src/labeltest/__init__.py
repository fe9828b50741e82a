"""Label-efficient two-sample testing."""

from labeltest._backend import BACKEND
from labeltest.core import (
    Budget,
    Decision,
    LabeledSet,
    Outcome,
    UnlabeledPool,
    load_dataset,
    query_oracle,
    save_dataset,
    split_by_label,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Budget",
    "Decision",
    "LabeledSet",
    "Outcome",
    "UnlabeledPool",
    "load_dataset",
    "query_oracle",
    "save_dataset",
    "split_by_label",
]
