"""Closed-form extremes of the total sum-AoI cost for identical nodes.

Two routes are provided for each extreme: the closed forms as published
(``theorem1_min`` / ``theorem1_max``) and direct simulations of the schedules
that attain them (``min_schedule_oracle`` / ``max_schedule_oracle``).

The published minimum does not agree with the sum of its own per-slot
values (for M=2, tau=16 the schedule gives 23.5, the closed form 20.5).
Both numbers are reported; the schedule simulation is the one used for
bracketing checks. :func:`min_formula_discrepancy` exposes the gap.

All quantities assume equal weights ``1/M``, ``A_m(1) = 1`` and a common AoI
cap. Pass ``exact=True`` to get :class:`fractions.Fraction` results.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class BoundDomainError(ValueError):
    """The closed form is not valid for the requested inputs."""


@dataclass(frozen=True)
class BoundInputs:
    num_nodes: int
    horizon: int
    aoi_cap: int

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("need at least one node")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.aoi_cap < self.num_nodes:
            raise ValueError("aoi_cap must be at least num_nodes")


def _out(value: Fraction, exact: bool):
    return value if exact else float(value)


def theorem1_min(inputs: BoundInputs, exact: bool = False):
    M, tau = inputs.num_nodes, inputs.horizon
    value = (
        Fraction((2 * M + 1) * (M - 1), 4)
        - sum(Fraction(n * n, 2 * M) for n in range(1, M))
        + Fraction((tau - (M + 1)) * (M + 1), 2)
    )
    return _out(value, exact)


def theorem1_max(inputs: BoundInputs, exact: bool = False):
    A, tau = inputs.aoi_cap, inputs.horizon
    if tau < A - 1:
        raise BoundDomainError(
            f"horizon {tau} < aoi_cap - 1 = {A - 1}; use max_schedule_oracle for the piecewise sum"
        )
    value = Fraction(A * (A - 1), 2) + (tau - (A - 1)) * A
    return _out(value, exact)


def per_slot_min(inputs: BoundInputs, slot: int, exact: bool = False):
    M = inputs.num_nodes
    if not 1 <= slot <= inputs.horizon:
        raise ValueError(f"slot {slot} outside [1, {inputs.horizon}]")
    if slot < M:
        value = Fraction(slot * M - slot * (slot - 1) // 2, M)
    else:
        value = Fraction(M + 1, 2)
    return _out(value, exact)


def per_slot_max(inputs: BoundInputs, slot: int, exact: bool = False):
    if not 1 <= slot <= inputs.horizon:
        raise ValueError(f"slot {slot} outside [1, {inputs.horizon}]")
    return _out(Fraction(min(slot, inputs.aoi_cap)), exact)


def min_schedule_oracle(inputs: BoundInputs, exact: bool = False):
    """Simulate the ideal schedule: each slot, refresh the stalest node.

    Geometry and energy are ignored. The cost of a slot is accrued before
    the refresh.
    """
    M = inputs.num_nodes
    aoi = [1] * M
    total = 0  # sum of raw ages; the 1/M weight is applied once at the end
    for _ in range(inputs.horizon):
        total += sum(aoi)
        stalest = max(range(M), key=lambda m: aoi[m])
        aoi = [1 if m == stalest else min(inputs.aoi_cap, a + 1) for m, a in enumerate(aoi)]
    return _out(Fraction(total, M), exact)


def max_schedule_oracle(inputs: BoundInputs, exact: bool = False):
    """Simulate the schedule that never refreshes any node."""
    M = inputs.num_nodes
    aoi = [1] * M
    total = 0
    for _ in range(inputs.horizon):
        total += sum(aoi)
        aoi = [min(inputs.aoi_cap, a + 1) for a in aoi]
    return _out(Fraction(total, M), exact)


def min_formula_discrepancy(inputs: BoundInputs) -> float:
    """``min_schedule_oracle - theorem1_min``; zero would mean they agree."""
    return float(min_schedule_oracle(inputs, exact=True) - theorem1_min(inputs, exact=True))


def bounds_row(inputs: BoundInputs) -> dict:
    """All four quantities; ``theorem1_max`` is None outside its domain."""
    try:
        tmax = theorem1_max(inputs)
    except BoundDomainError:
        tmax = None
    return {
        "num_nodes": inputs.num_nodes,
        "horizon": inputs.horizon,
        "aoi_cap": inputs.aoi_cap,
        "theorem1_min": theorem1_min(inputs),
        "theorem1_max": tmax,
        "min_schedule_oracle": min_schedule_oracle(inputs),
        "max_schedule_oracle": max_schedule_oracle(inputs),
    }
