"""The per-step meta-controller: meta-action selection, goal scheduling,
grace periods, dynamic subgoal allocation and context resets.

Threshold scale: the abort and switch thresholds are interpreted on the
pre-activation scale of the corresponding sigmoid state. Abort requires
the potentiality pre-activation to sit below tau_abort, switch requires
the gate pre-activation to sit below -tau_switch (a closure margin under
the neutral point). Both are additionally debounced: the condition must
hold for a run of consecutive steps (the patience) before the action
fires, so one noisy step never tears down a goal. The commit threshold
applies directly to the raw sufficiency blend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .states import MetaStateVector, sigmoid

ALLOC_MIN = 50
ALLOC_MAX = 300


class InvalidCallError(ValueError):
    pass


class MetaAction(Enum):
    PERSIST = "PERSIST"
    SWITCH = "SWITCH"
    ABORT = "ABORT"
    COMMIT = "COMMIT"


class DecisionReason(Enum):
    GRACE = "GRACE"
    LOW_POTENTIALITY = "LOW_POTENTIALITY"
    GATE_CLOSED = "GATE_CLOSED"
    EVIDENCE_COMMIT = "EVIDENCE_COMMIT"
    SUBGOAL_CAP = "SUBGOAL_CAP"
    DEFAULT = "DEFAULT"


class MethodVariant(Enum):
    FIXED_ORDER = "FIXED_ORDER"
    REACTIVE_ORDER = "REACTIVE_ORDER"
    MORN_ABORT_ONLY = "MORN_ABORT_ONLY"
    MORN_SWITCH_ONLY = "MORN_SWITCH_ONLY"
    MORN_FULL = "MORN_FULL"

    @property
    def abort_enabled(self) -> bool:
        return self in (MethodVariant.MORN_ABORT_ONLY, MethodVariant.MORN_FULL)

    @property
    def switch_enabled(self) -> bool:
        return self in (MethodVariant.MORN_SWITCH_ONLY, MethodVariant.MORN_FULL)


@dataclass
class Thresholds:
    abort: float = 0.30  # tau_A, on the potentiality pre-activation
    switch: float = 0.20  # tau_S, closure margin on the gate pre-activation
    commit: float = 0.60  # tau_C, on the raw sufficiency scale
    commit_distance: float = 3.0  # meters
    grace: int = 20  # steps
    abort_patience: int = 60  # consecutive below-threshold steps
    switch_patience: int = 10
    commit_warmup: int = 5  # steps before commit is meaningful (window fill)

    def validate(self) -> None:
        if self.commit_distance <= 0:
            raise ValueError("commit_distance must be positive")
        if self.grace < 0:
            raise ValueError("grace must be nonnegative")
        if self.abort_patience < 1 or self.switch_patience < 1:
            raise ValueError("patience must be >= 1")

    def abort_level(self) -> float:
        """Abort threshold mapped onto the potentiality state scale."""
        return sigmoid(self.abort)

    def switch_level(self) -> float:
        """Switch threshold mapped onto the persistence state scale."""
        return sigmoid(-self.switch)


class GoalState(Enum):
    PENDING = "PENDING"
    ACTIVE = "ACTIVE"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"


@dataclass
class GoalStatus:
    goal_id: int
    state: GoalState = GoalState.PENDING
    spent: int = 0
    switch_count: int = 0


@dataclass
class BudgetLedger:
    budget_max: int
    allocation: int
    elapsed: int = 0
    active_spent: int = 0


@dataclass
class ExecutiveDecision:
    action: MetaAction
    states: MetaStateVector
    reason: DecisionReason
    next_goal: Optional[int] = None


class MissionSchedule:
    """Goal statuses plus the prescribed order; at most one goal active."""

    def __init__(self, goal_ids: list[int]):
        self.order = list(goal_ids)
        self.goals = {g: GoalStatus(g) for g in goal_ids}
        self.active_id: Optional[int] = None

    @property
    def active(self) -> GoalStatus:
        if self.active_id is None:
            raise InvalidCallError("no active goal")
        return self.goals[self.active_id]

    def activate(self, goal_id: int) -> None:
        st = self.goals[goal_id]
        if st.state not in (GoalState.PENDING,):
            raise InvalidCallError(f"goal {goal_id} not pending")
        st.state = GoalState.ACTIVE
        self.active_id = goal_id

    def open_ids(self) -> list[int]:
        """Goals still in play (pending or active), in prescribed order."""
        return [g for g in self.order if self.goals[g].state in (GoalState.PENDING, GoalState.ACTIVE)]

    def pending_ids(self) -> list[int]:
        return [g for g in self.order if self.goals[g].state is GoalState.PENDING]

    def done(self) -> bool:
        return not self.open_ids()


def allocate(budget: BudgetLedger, remaining_goals: int,
             lo: int = ALLOC_MIN, hi: int = ALLOC_MAX) -> int:
    """Dynamic per-subgoal step allocation: remaining budget split evenly
    across open goals, clamped into [lo, hi]."""
    if remaining_goals < 1:
        raise InvalidCallError("remaining_goals must be >= 1")
    share = (budget.budget_max - budget.elapsed) // remaining_goals
    return min(hi, max(share, lo))


def decide(
    states: MetaStateVector,
    distance: float,
    ledger: BudgetLedger,
    thresholds: Thresholds,
    variant: MethodVariant,
    remaining_count: int = 2,
    abort_streak: int = 0,
    switch_streak: int = 0,
) -> ExecutiveDecision:
    """Pick the meta-action for this step.

    Branch priority: subgoal cap, abort, switch, commit, persist. The cap
    is a benchmark-level rule and fires in every variant; with a single
    open goal it aborts that goal outright so the episode terminates
    instead of re-cycling the same goal forever. Grace protects abort and
    switch only; commit is exempt from grace but needs a short warmup so
    a freshly reset window (trivially stable) cannot trigger it.
    """
    spent = ledger.active_spent
    in_grace = spent < thresholds.grace
    abort_wants = states.potentiality < thresholds.abort_level()
    switch_wants = states.persistence < thresholds.switch_level()

    if spent >= ledger.allocation:
        action = MetaAction.ABORT if remaining_count <= 1 else MetaAction.SWITCH
        return ExecutiveDecision(action, states, DecisionReason.SUBGOAL_CAP)

    if variant.abort_enabled and abort_wants:
        if in_grace:
            return ExecutiveDecision(MetaAction.PERSIST, states, DecisionReason.GRACE)
        if abort_streak >= thresholds.abort_patience:
            return ExecutiveDecision(MetaAction.ABORT, states, DecisionReason.LOW_POTENTIALITY)

    if variant.switch_enabled and switch_wants:
        if in_grace:
            return ExecutiveDecision(MetaAction.PERSIST, states, DecisionReason.GRACE)
        if switch_streak >= thresholds.switch_patience and remaining_count > 1:
            return ExecutiveDecision(MetaAction.SWITCH, states, DecisionReason.GATE_CLOSED)

    if (
        states.sufficiency > thresholds.commit
        and distance < thresholds.commit_distance
        and spent >= thresholds.commit_warmup
    ):
        return ExecutiveDecision(MetaAction.COMMIT, states, DecisionReason.EVIDENCE_COMMIT)

    return ExecutiveDecision(MetaAction.PERSIST, states, DecisionReason.DEFAULT)


def select_next(
    remaining: list[int],
    agent_position: tuple[float, float],
    goal_positions: dict[int, tuple[float, float]],
) -> int:
    """Greedy geometric re-ordering: nearest remaining goal by Euclidean
    distance, ties broken by lowest goal id."""
    if not remaining:
        raise InvalidCallError("select_next on empty goal set")
    ax, ay = agent_position

    def key(g: int) -> tuple[float, int]:
        gx, gy = goal_positions[g]
        return (math.hypot(gx - ax, gy - ay), g)

    return min(remaining, key=key)


def select_next_fixed(remaining: list[int], order: list[int], after: Optional[int]) -> int:
    """Prescribed-order selection: the next open goal after `after` in the
    original order, wrapping around."""
    if not remaining:
        raise InvalidCallError("select_next on empty goal set")
    if after is None or after not in order:
        for g in order:
            if g in remaining:
                return g
    start = order.index(after)
    n = len(order)
    for i in range(1, n + 1):
        g = order[(start + i) % n]
        if g in remaining:
            return g
    raise InvalidCallError("no selectable goal")


def apply(
    decision: ExecutiveDecision,
    schedule: MissionSchedule,
    ledger: BudgetLedger,
    agent_position: tuple[float, float],
    goal_positions: dict[int, tuple[float, float]],
    variant: MethodVariant,
) -> Optional[int]:
    """Apply the decision to the schedule and ledger.

    Non-persist actions retire or recycle the active goal, recompute the
    subgoal allocation from the remaining budget and activate the next
    goal (greedy geometric, or prescribed order under FIXED_ORDER). A
    goal just switched away from is not immediately re-selected while an
    alternative exists. Returns the newly activated goal id, or None.
    """
    if decision.action is MetaAction.PERSIST:
        return None

    prev_id = schedule.active_id
    active = schedule.active
    if decision.action is MetaAction.COMMIT:
        active.state = GoalState.COMPLETED
    elif decision.action is MetaAction.ABORT:
        active.state = GoalState.FAILED
    else:
        active.state = GoalState.PENDING
        active.switch_count += 1
    schedule.active_id = None

    remaining = schedule.pending_ids()
    if not remaining:
        decision.next_goal = None
        return None

    candidates = [g for g in remaining if g != prev_id] or remaining
    if variant is MethodVariant.FIXED_ORDER:
        nxt = select_next_fixed(candidates, schedule.order, prev_id)
    else:
        nxt = select_next(candidates, agent_position, goal_positions)

    ledger.allocation = allocate(ledger, len(remaining))
    ledger.active_spent = 0
    schedule.activate(nxt)
    decision.next_goal = nxt
    return nxt
