from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScenarioMatrix:
    """N x D simulated one-step simple returns drawn from one fitted model."""

    values: np.ndarray
    model_id: str
    asof: str = ""
    seed: int | None = None
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"scenario matrix must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def sidecar(self) -> dict:
        return {
            "model_id": self.model_id,
            "asof": self.asof,
            "N": self.n,
            "D": self.d,
            "seed": self.seed,
        }
