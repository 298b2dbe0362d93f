"""Monte Carlo emulation of how unavailable proposals distort the balance
between birth, death and change moves.

The emulator has no trees: unavailability is an input probability mass per
move type. Under the standard mode an unavailable move is simply redrawn.
Under the sweeping mode an unavailable birth is redrawn, while an
unavailable change executes a death instead, except for the configured
fraction of cases with several undersized partitions, which are redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BalanceSpec:
    p_b: float
    p_d: float
    p_c: float
    p_bu: float
    p_cu: float
    mode: str = "standard"
    case3_frac: float = 0.0
    draws: int = 10_000

    def __post_init__(self):
        if abs(self.p_b + self.p_d + self.p_c - 1.0) > 1e-12:
            raise ValueError("move probabilities must sum to 1")
        if min(self.p_b, self.p_d, self.p_c) < 0:
            raise ValueError("move probabilities must be non-negative")
        if not 0 <= self.p_bu <= self.p_b:
            raise ValueError(f"p_bu must lie in [0, p_b={self.p_b}]")
        if not 0 <= self.p_cu <= self.p_c:
            raise ValueError(f"p_cu must lie in [0, p_c={self.p_c}]")
        if self.mode not in ("standard", "sweeping"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.case3_frac <= 1:
            raise ValueError("case3_frac must lie in [0, 1]")
        if self.draws < 1:
            raise ValueError("draws must be positive")


@dataclass
class BalanceResult:
    """Realized fractions among executed moves, plus the redraw fraction."""

    birth: float
    death: float
    change: float
    resample_fraction: float
    executed: int
    attempts: int


def analytic_fractions(spec: BalanceSpec) -> tuple[float, float, float]:
    """Closed-form executed-move fractions for the emulator's semantics."""
    if spec.mode == "standard":
        masses = (spec.p_b - spec.p_bu, spec.p_d, spec.p_c - spec.p_cu)
    else:
        swept_to_death = (1.0 - spec.case3_frac) * spec.p_cu
        masses = (
            spec.p_b - spec.p_bu,
            spec.p_d + swept_to_death,
            spec.p_c - spec.p_cu,
        )
    total = sum(masses)
    return tuple(m / total for m in masses)


def emulate(spec: BalanceSpec, seed: int = 0) -> BalanceResult:
    """Draw moves until `draws` of them execute; report realized fractions."""
    rng = np.random.default_rng(seed)
    counts = {"birth": 0, "death": 0, "change": 0}
    executed = 0
    attempts = 0
    resampled = 0
    cond_bu = spec.p_bu / spec.p_b if spec.p_b > 0 else 0.0
    cond_cu = spec.p_cu / spec.p_c if spec.p_c > 0 else 0.0
    while executed < spec.draws:
        attempts += 1
        u = rng.random()
        if u < spec.p_b:
            if rng.random() < cond_bu:
                resampled += 1
                continue
            counts["birth"] += 1
        elif u < spec.p_b + spec.p_d:
            counts["death"] += 1
        else:
            if rng.random() < cond_cu:
                if spec.mode == "standard" or rng.random() < spec.case3_frac:
                    resampled += 1
                    continue
                counts["death"] += 1  # swept: the change executes as a death
            else:
                counts["change"] += 1
        executed += 1
    return BalanceResult(
        birth=counts["birth"] / executed,
        death=counts["death"] / executed,
        change=counts["change"] / executed,
        resample_fraction=resampled / attempts,
        executed=executed,
        attempts=attempts,
    )
