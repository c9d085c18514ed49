"""Reference scheduling policies: fixed-threshold rule and uniform random."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Action, N_ACTIONS, StateVector


@dataclass(frozen=True)
class ThresholdConfig:
    wifi_idle_pivot: float = 0.5
    licensed_residual_pivot: float = 0.5

    def __post_init__(self) -> None:
        for name in ("wifi_idle_pivot", "licensed_residual_pivot"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def threshold_policy(state: StateVector, config: ThresholdConfig | None = None) -> int:
    """Fixed-rule scheduler.

    Unlicensed first whenever the idle feature clears the pivot and the
    unlicensed option has residual bandwidth; otherwise the direct-sidelink
    licensed option with the larger residual when that residual clears the
    licensed pivot, else the gNB option with the larger residual. Ties break
    toward the lower action index.
    """
    cfg = config if config is not None else ThresholdConfig()
    if state.wifi_idle >= cfg.wifi_idle_pivot and state.residual[Action.SLU_5G] > 0.0:
        return int(Action.SLU_5G)
    sll = (
        Action.SLL_28G
        if state.residual[Action.SLL_28G] >= state.residual[Action.SLL_26G]
        else Action.SLL_26G
    )
    if state.residual[sll] >= cfg.licensed_residual_pivot:
        return int(sll)
    cc = (
        Action.CC_28G
        if state.residual[Action.CC_28G] >= state.residual[Action.CC_26G]
        else Action.CC_26G
    )
    return int(cc)


def random_policy(rng: np.random.Generator) -> int:
    """Uniform choice over the five transmission options."""
    return int(rng.integers(N_ACTIONS))
