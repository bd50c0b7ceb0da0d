"""Benchmark harness: seeded episode generation, closed-loop execution of
one method variant over one episode, metric aggregation (MGSR / SSR / CR /
Steps / WSF / utility), failure decomposition and threshold sweeps.

All randomness flows through per-episode seeds derived from the master
seed by a fixed 64-bit mixing function, so every variant replays the
same worlds and the same perception noise stream (paired comparison).
"""

from __future__ import annotations

import copy
import math
import random
from collections import namedtuple
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional

import numpy as np

from .config import RunConfig
from .executive import (
    BudgetLedger,
    DecisionReason,
    GoalState,
    InvalidCallError,
    MetaAction,
    MethodVariant,
    MissionSchedule,
    allocate,
    apply,
    decide,
    select_next,
)
from .signals import RollingWindow, SignalSample, update
from .states import MetaStateVector, SunkCost, persistence_gate, potentiality, sufficiency
from .world import (
    GoalInstance,
    GridMap,
    Navigator,
    WorldParams,
    distance_field,
    generate_map,
    parse_grid,
)

_MASK64 = (1 << 64) - 1

CATEGORIES = ("chair", "bed", "plant", "toilet", "tv", "sofa", "sink", "mug")


def mix_seed(master_seed: int, index: int) -> int:
    """SplitMix64-style derivation of the per-episode seed."""
    z = (master_seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


FEASIBLE = "present"
ABSENT = "absent"
SEALED = "sealed"


@dataclass
class GoalSpec:
    goal_id: int
    category: str
    feasibility: str = FEASIBLE  # present | absent | sealed
    detectability: float = 0.9


@dataclass
class EpisodeSpec:
    episode_id: int
    seed: int
    goal_count: int
    budget_max: int
    goals: list[GoalSpec]
    min_separation: float = 4.0
    fixture: Optional[str] = None  # fixture map name instead of procedural
    world: WorldParams = field(default_factory=WorldParams)


class GenerationError(RuntimeError):
    pass


def generate(count_k2: int, count_k3: int, master_seed: int,
             config: Optional[RunConfig] = None) -> list[EpisodeSpec]:
    """Deterministic episode suite: `count_k2` two-goal episodes followed
    by `count_k3` three-goal episodes, with a configured fraction of
    goals infeasible (absent or sealed)."""
    if count_k2 < 0 or count_k3 < 0:
        raise InvalidCallError("episode counts must be nonnegative")
    config = config or RunConfig()
    bp = config.bench
    specs: list[EpisodeSpec] = []
    for i in range(count_k2 + count_k3):
        k = 2 if i < count_k2 else 3
        seed = mix_seed(master_seed, i)
        grng = random.Random(seed ^ 0x5EED5EED)
        goals = []
        sealed_used = False
        for g in range(k):
            feas = FEASIBLE
            if grng.random() < bp.infeasible_fraction:
                if grng.random() < 0.5 and not sealed_used:
                    feas = SEALED
                    sealed_used = True
                else:
                    feas = ABSENT
            goals.append(GoalSpec(
                goal_id=g + 1,
                category=CATEGORIES[grng.randrange(len(CATEGORIES))],
                feasibility=feas,
            ))
        specs.append(EpisodeSpec(
            episode_id=i,
            seed=seed,
            goal_count=k,
            budget_max=bp.budget_k2 if k == 2 else bp.budget_k3,
            goals=goals,
            min_separation=bp.min_separation,
            world=replace(config.world),
        ))
    return specs


@dataclass(eq=False)
class World:
    gmap: GridMap
    goals: dict[int, GoalInstance]
    fields: dict[int, np.ndarray]  # geodesic meters to each goal
    positions_m: dict[int, tuple[float, float]]
    sentinel: float  # finite stand-in for unreachable distance


def load_fixture(name: str) -> str:
    return resources.files("morn").joinpath(f"fixtures/{name}.txt").read_text()


def build_world(spec: EpisodeSpec) -> World:
    """Deterministically materialize the world for an episode spec:
    procedural map (or fixture), goal placement honoring the pairwise
    separation invariant, and precomputed distance fields."""
    rng = random.Random(spec.seed)
    if spec.fixture is not None:
        gmap, digit_cells = parse_grid(load_fixture(spec.fixture), spec.world.cell_size)
        positions = {}
        for gs in spec.goals:
            if gs.goal_id not in digit_cells:
                raise GenerationError(f"fixture {spec.fixture} has no goal {gs.goal_id}")
            positions[gs.goal_id] = digit_cells[gs.goal_id]
        return _assemble(gmap, spec, positions)

    needs_sealed = any(g.feasibility == SEALED for g in spec.goals)
    for _map_attempt in range(8):
        gmap, rooms, sealed_idx = generate_map(rng, spec.world, sealed_room=needs_sealed)
        reach = distance_field(gmap, gmap.spawn)
        open_rooms = [i for i in range(len(rooms)) if i != sealed_idx]
        for _placement in range(30):
            positions: dict[int, tuple[int, int]] = {}
            used_rooms: set[int] = set()
            ok = True
            for gs in spec.goals:
                if gs.feasibility == SEALED:
                    room = rooms[sealed_idx]
                    positions[gs.goal_id] = room[rng.randrange(len(room))]
                    continue
                choices = [i for i in open_rooms if i not in used_rooms] or open_rooms
                room_idx = choices[rng.randrange(len(choices))]
                room = rooms[room_idx]
                cand = [c for c in room if math.isfinite(reach[c])]
                if not cand:
                    ok = False
                    break
                used_rooms.add(room_idx)
                positions[gs.goal_id] = cand[rng.randrange(len(cand))]
            if ok and _separation_ok(gmap, spec, positions):
                return _assemble(gmap, spec, positions)
    raise GenerationError(
        f"episode {spec.episode_id}: could not satisfy goal separation "
        f">= {spec.min_separation} m after bounded retries"
    )


def _separation_ok(gmap: GridMap, spec: EpisodeSpec,
                   positions: dict[int, tuple[int, int]]) -> bool:
    ids = list(positions)
    for i, a in enumerate(ids):
        fa = distance_field(gmap, positions[a])
        for b in ids[i + 1:]:
            if fa[positions[b]] < spec.min_separation:  # inf passes
                return False
    return True


def _assemble(gmap: GridMap, spec: EpisodeSpec,
              positions: dict[int, tuple[int, int]]) -> World:
    goals = {}
    fields = {}
    pos_m = {}
    for gs in spec.goals:
        cell = positions[gs.goal_id]
        goals[gs.goal_id] = GoalInstance(
            goal_id=gs.goal_id,
            category=gs.category,
            position=cell,
            detectability=gs.detectability,
            present=(gs.feasibility != ABSENT),
        )
        fields[gs.goal_id] = distance_field(gmap, cell)
        pos_m[gs.goal_id] = gmap.to_meters(cell)
    sentinel = 2.0 * (gmap.height + gmap.width) * gmap.cell_size
    return World(gmap=gmap, goals=goals, fields=fields,
                 positions_m=pos_m, sentinel=sentinel)


StepRecord = namedtuple(
    "StepRecord",
    "t goal_id pose distance evidence potentiality persistence sufficiency action reason",
)


@dataclass
class GoalOutcome:
    goal_id: int
    state: GoalState
    spent: int
    switch_count: int
    committed: bool = False
    found: bool = False
    commit_distance: Optional[float] = None
    aborted_by_meta: bool = False
    gate_switches: int = 0
    cap_hits: int = 0


@dataclass(eq=False)
class EpisodeTrace:
    spec: EpisodeSpec
    variant: MethodVariant
    steps: list[StepRecord]
    outcomes: dict[int, GoalOutcome]
    total_steps: int
    commit_sequence: list[int]  # goal ids in true-completion order

    @property
    def found_count(self) -> int:
        return sum(1 for o in self.outcomes.values() if o.found)


def run(spec: EpisodeSpec, variant: MethodVariant, config: RunConfig,
        world: Optional[World] = None, record_steps: bool = True) -> EpisodeTrace:
    """Execute one episode under one method variant.

    Terminates on goal exhaustion or at the step budget, never later.
    All failure modes are recorded outcomes, not errors.
    """
    if world is None:
        world = build_world(spec)
    rng = random.Random(spec.seed ^ 0xC0FFEE)
    gmap = world.gmap
    nav = Navigator(gmap, config.perception)
    order = [g.goal_id for g in spec.goals]
    schedule = MissionSchedule(order)
    agent_m = gmap.to_meters(nav.pose)
    if variant is MethodVariant.REACTIVE_ORDER:
        first = select_next(order, agent_m, world.positions_m)
    else:
        first = order[0]
    schedule.activate(first)
    ledger = BudgetLedger(budget_max=spec.budget_max, allocation=0)
    ledger.allocation = allocate(ledger, len(order))
    window = RollingWindow(config.signal.window)
    nav.begin_goal_context()

    thresholds = config.thresholds
    weights = config.weights
    sigpar = config.signal
    abort_level = thresholds.abort_level()
    switch_level = thresholds.switch_level()
    success_radius = config.bench.success_radius

    steps: list[StepRecord] = []
    commit_sequence: list[int] = []
    events: dict[int, GoalOutcome] = {
        g: GoalOutcome(g, GoalState.PENDING, 0, 0) for g in order
    }
    abort_streak = 0
    switch_streak = 0

    for t in range(1, spec.budget_max + 1):
        gid = schedule.active_id
        goal = world.goals[gid]
        dfield = world.fields[gid]

        nav.step()
        pose = nav.pose
        d_raw = dfield[pose]
        d = float(d_raw) if math.isfinite(d_raw) else world.sentinel
        evidence, detected = world_emit(goal, pose, gmap, config, rng, d_raw)
        nav.observe(evidence, detected, goal, rng)

        ledger.elapsed = t
        ledger.active_spent += 1
        schedule.goals[gid].spent += 1

        summary = update(window, SignalSample(t, d, evidence), sigpar)
        pi = potentiality(summary.velocity, evidence, summary.stability, weights)
        gamma = persistence_gate(
            summary.info_gain,
            SunkCost(ledger.active_spent, ledger.allocation),
            summary.velocity,
            weights,
        )
        sigma = sufficiency(evidence, summary.stability, d, weights)
        states = MetaStateVector(pi, gamma, sigma)

        # Streaks only accumulate once the grace period has elapsed, so the
        # earliest teardown sits a full patience run beyond the grace window.
        post_grace = ledger.active_spent >= thresholds.grace
        abort_streak = abort_streak + 1 if (post_grace and pi < abort_level) else 0
        switch_streak = switch_streak + 1 if (post_grace and gamma < switch_level) else 0

        open_ids = schedule.open_ids()
        decision = decide(states, d, ledger, thresholds, variant,
                          remaining_count=len(open_ids),
                          abort_streak=abort_streak, switch_streak=switch_streak)
        if record_steps:
            steps.append(StepRecord(t, gid, pose, d, evidence, pi, gamma, sigma,
                                    decision.action.value, decision.reason.value))

        if decision.action is not MetaAction.PERSIST:
            ev = events[gid]
            if decision.action is MetaAction.COMMIT:
                ev.committed = True
                ev.commit_distance = d
                ev.found = bool(goal.present and d_raw <= success_radius)
                if ev.found:
                    commit_sequence.append(gid)
            elif decision.action is MetaAction.ABORT:
                if decision.reason is DecisionReason.LOW_POTENTIALITY:
                    ev.aborted_by_meta = True
                else:
                    ev.cap_hits += 1
            else:
                if decision.reason is DecisionReason.GATE_CLOSED:
                    ev.gate_switches += 1
                else:
                    ev.cap_hits += 1

            agent_m = gmap.to_meters(pose)
            apply(decision, schedule, ledger, agent_m, world.positions_m, variant)
            window.reset()
            abort_streak = 0
            switch_streak = 0
            if schedule.done():
                break
            nav.begin_goal_context()

    for g in order:
        st = schedule.goals[g]
        ev = events[g]
        ev.state = st.state
        ev.spent = st.spent
        ev.switch_count = st.switch_count

    return EpisodeTrace(
        spec=spec,
        variant=variant,
        steps=steps,
        outcomes=events,
        total_steps=min(ledger.elapsed, spec.budget_max),
        commit_sequence=commit_sequence,
    )


def world_emit(goal, pose, gmap, config: RunConfig, rng, d_raw: float):
    """Evidence emission with the precomputed geodesic distance."""
    from .world import emit_evidence

    dist = float(d_raw) if math.isfinite(d_raw) else None
    if dist is None:
        # unreachable goal: never in signal range
        p = config.perception
        noise = rng.gauss(0.0, p.noise_std) if p.noise_std > 0 else 0.0
        if p.false_positive_rate > 0 and rng.random() < p.false_positive_rate:
            score = p.base_noise_mean + p.spike_amplitude + noise
        else:
            score = p.base_noise_mean + noise
        return (max(0.0, min(score, 1.0)), False)
    return emit_evidence(goal, pose, gmap, config.perception, rng, distance=dist)


FAILURE_MODES = ("NO_DETECTION", "ABORTED", "SWITCHED_UNRESOLVED", "FALSE_COMMIT")


@dataclass
class MetricsReport:
    mgsr: float
    ssr: float
    cr: float
    mean_steps: float
    wsf: float
    failure_counts: dict[str, int]
    utility_mean: float
    episodes: int


def decompose_failures(traces: list[EpisodeTrace]) -> dict[str, int]:
    """Tag every never-found goal with its dominant failure mode.

    FALSE_COMMIT: committed outside the true success radius (or on an
    absent goal). ABORTED: retired by the low-potentiality branch.
    SWITCHED_UNRESOLVED: deprioritized by the persistence gate and never
    completed. NO_DETECTION: budget or cap exhausted while searching.
    """
    counts = {m: 0 for m in FAILURE_MODES}
    for tr in traces:
        for o in tr.outcomes.values():
            if o.found:
                continue
            if o.committed:
                counts["FALSE_COMMIT"] += 1
            elif o.aborted_by_meta:
                counts["ABORTED"] += 1
            elif o.gate_switches > 0:
                counts["SWITCHED_UNRESOLVED"] += 1
            else:
                counts["NO_DETECTION"] += 1
    return counts


def compute_metrics(traces: list[EpisodeTrace], reward: float = 1.0,
                    lambda_cost: float = 0.0) -> MetricsReport:
    """Aggregate the paper-protocol metrics over a set of traces.

    A goal counts as found only if the executive committed AND the agent
    was truly within the success radius, so trigger-happy commits cannot
    inflate CR.
    """
    if not traces:
        raise InvalidCallError("compute_metrics on empty trace list")
    n = len(traces)
    mgsr = cr = wsf = steps_sum = util = ssr = 0.0
    for tr in traces:
        k = tr.spec.goal_count
        found = tr.found_count
        mgsr += 1.0 if found == k else 0.0
        cr += found / k
        wasted = sum(o.spent for o in tr.outcomes.values() if not o.found)
        wsf += wasted / tr.total_steps if tr.total_steps else 0.0
        steps_sum += tr.total_steps
        util += reward * found - lambda_cost * tr.total_steps
        prescribed = [g.goal_id for g in tr.spec.goals]
        ssr += 1.0 if (found == k and tr.commit_sequence == prescribed) else 0.0
    return MetricsReport(
        mgsr=mgsr / n,
        ssr=ssr / n,
        cr=cr / n,
        mean_steps=steps_sum / n,
        wsf=wsf / n,
        failure_counts=decompose_failures(traces),
        utility_mean=util / n,
        episodes=n,
    )


def run_suite(specs: list[EpisodeSpec], variants: list[MethodVariant],
              config: RunConfig, record_steps: bool = False,
              workers: int = 1) -> dict[MethodVariant, list[EpisodeTrace]]:
    """Run every variant over every spec. Worlds are built once per spec
    and shared across variants; results are keyed and ordered so the
    output is independent of scheduling."""
    if workers > 1:
        return _run_suite_parallel(specs, variants, config, record_steps, workers)
    out: dict[MethodVariant, list[EpisodeTrace]] = {v: [] for v in variants}
    for spec in specs:
        world = build_world(spec)
        for v in variants:
            out[v].append(run(spec, v, config, world=world, record_steps=record_steps))
    return out


def _run_one(args):
    spec, variants, config, record_steps = args
    world = build_world(spec)
    return spec.episode_id, [
        run(spec, v, config, world=world, record_steps=record_steps) for v in variants
    ]


def _run_suite_parallel(specs, variants, config, record_steps, workers):
    from concurrent.futures import ProcessPoolExecutor

    jobs = [(spec, variants, config, record_steps) for spec in specs]
    results = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for ep_id, traces in pool.map(_run_one, jobs, chunksize=8):
            results[ep_id] = traces
    out: dict[MethodVariant, list[EpisodeTrace]] = {v: [] for v in variants}
    for spec in specs:  # canonical order regardless of completion order
        traces = results[spec.episode_id]
        for v, tr in zip(variants, traces):
            out[v].append(tr)
    return out


SWEEP_PARAMETERS = {
    "tau_a": "abort",
    "tau_s": "switch",
    "tau_c": "commit",
    "d_commit": "commit_distance",
    "t_grace": "grace",
}


def sweep(specs: list[EpisodeSpec], variant: MethodVariant, parameter: str,
          values: list[float], config: RunConfig,
          workers: int = 1) -> list[tuple[float, MetricsReport]]:
    """Re-run the same episode set at each threshold value (paired
    comparison; seeds and worlds identical throughout)."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigKeyError(
            f"unknown sweep parameter {parameter!r}; "
            f"expected one of {sorted(SWEEP_PARAMETERS)}"
        )
    attr = SWEEP_PARAMETERS[parameter]
    out = []
    for value in values:
        cfg = copy.deepcopy(config)
        setattr(cfg.thresholds, attr, int(value) if attr == "grace" else value)
        traces = run_suite(specs, [variant], cfg, workers=workers)[variant]
        out.append((value, compute_metrics(
            traces, reward=cfg.bench.reward, lambda_cost=cfg.bench.lambda_cost)))
    return out


class ConfigKeyError(ValueError):
    pass
