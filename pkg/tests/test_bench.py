"""Tests for episode generation, the closed-loop runner and metrics."""

import math
import random

import pytest

from morn.bench import (
    ABSENT,
    FEASIBLE,
    SEALED,
    ConfigKeyError,
    EpisodeSpec,
    EpisodeTrace,
    GoalOutcome,
    GoalSpec,
    build_world,
    compute_metrics,
    decompose_failures,
    generate,
    mix_seed,
    run,
    run_suite,
    sweep,
)
from morn.config import RunConfig, load_config
from morn.executive import GoalState, InvalidCallError, MethodVariant

CFG = load_config()


def small_suite(k2=4, k3=2, seed=314):
    return generate(k2, k3, seed, CFG)


def fixture_spec(name, goals, budget=500, seed=7):
    return EpisodeSpec(episode_id=0, seed=seed, goal_count=len(goals),
                       budget_max=budget, goals=goals, fixture=name)


def synthetic_trace(found_flags, spents, total_steps, goal_count=None,
                    budget=500, commit_sequence=None):
    """Hand-built trace for metric arithmetic tests."""
    k = goal_count or len(found_flags)
    goals = [GoalSpec(i + 1, "thing") for i in range(k)]
    spec = EpisodeSpec(episode_id=0, seed=1, goal_count=k, budget_max=budget,
                       goals=goals)
    outcomes = {}
    for i, (found, spent) in enumerate(zip(found_flags, spents), start=1):
        outcomes[i] = GoalOutcome(
            i, GoalState.COMPLETED if found else GoalState.FAILED,
            spent, 0, committed=found, found=found)
    return EpisodeTrace(spec=spec, variant=MethodVariant.MORN_FULL, steps=[],
                        outcomes=outcomes, total_steps=total_steps,
                        commit_sequence=commit_sequence or
                        [i for i, f in enumerate(found_flags, 1) if f])


class TestSeeding:
    def test_mix_seed_deterministic_and_spread(self):
        assert mix_seed(1, 0) == mix_seed(1, 0)
        seeds = {mix_seed(20240901, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert all(0 <= s < 2 ** 64 for s in seeds)

    def test_master_seed_changes_everything(self):
        assert mix_seed(1, 0) != mix_seed(2, 0)


class TestGenerate:
    def test_counts_and_budgets(self):
        specs = generate(300, 200, 20240901, CFG)
        assert len(specs) == 500
        assert [s.episode_id for s in specs] == list(range(500))
        assert all(s.goal_count == 2 and s.budget_max == 500 for s in specs[:300])
        assert all(s.goal_count == 3 and s.budget_max == 650 for s in specs[300:])

    def test_empty(self):
        assert generate(0, 0, 1, CFG) == []

    def test_deterministic(self):
        assert generate(20, 10, 5, CFG) == generate(20, 10, 5, CFG)

    def test_infeasible_fraction_is_respected(self):
        specs = generate(300, 200, 20240901, CFG)
        goals = [g for s in specs for g in s.goals]
        infeasible = sum(1 for g in goals if g.feasibility != FEASIBLE)
        frac = infeasible / len(goals)
        assert abs(frac - CFG.bench.infeasible_fraction) < 0.05

    def test_at_most_one_sealed_goal_per_episode(self):
        specs = generate(300, 200, 20240901, CFG)
        for s in specs:
            assert sum(1 for g in s.goals if g.feasibility == SEALED) <= 1

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidCallError):
            generate(-1, 0, 1, CFG)


class TestBuildWorld:
    def test_fixture_positions(self):
        spec = fixture_spec("two_room", [GoalSpec(1, "mug"), GoalSpec(2, "tv")])
        world = build_world(spec)
        assert set(world.goals) == {1, 2}
        assert all(world.gmap.is_free(g.position) for g in world.goals.values())

    def test_sealed_goal_unreachable_but_sentinel_finite(self):
        spec = fixture_spec("sealed", [GoalSpec(1, "mug", feasibility=SEALED),
                                       GoalSpec(2, "tv")])
        world = build_world(spec)
        assert math.isinf(world.fields[1][world.gmap.spawn])
        assert math.isfinite(world.fields[2][world.gmap.spawn])
        assert math.isfinite(world.sentinel) and world.sentinel > 0

    def test_separation_invariant_on_generated_worlds(self):
        for spec in small_suite(6, 3):
            world = build_world(spec)
            ids = list(world.goals)
            for i, a in enumerate(ids):
                for b in ids[i + 1:]:
                    d = world.fields[a][world.goals[b].position]
                    assert d >= spec.min_separation or math.isinf(d)

    def test_deterministic(self):
        spec = small_suite(1, 0)[0]
        a, b = build_world(spec), build_world(spec)
        assert (a.gmap.cells == b.gmap.cells).all()
        assert {g: v.position for g, v in a.goals.items()} == \
               {g: v.position for g, v in b.goals.items()}


class TestRun:
    def test_budget_bound_and_contiguous_steps(self):
        for spec in small_suite(3, 2):
            tr = run(spec, MethodVariant.MORN_FULL, CFG)
            assert tr.total_steps <= spec.budget_max
            assert [rec.t for rec in tr.steps] == list(range(1, len(tr.steps) + 1))
            charged = sum(o.spent for o in tr.outcomes.values())
            assert charged == tr.total_steps

    def test_replay_determinism(self):
        spec = small_suite(2, 0)[1]
        a = run(spec, MethodVariant.MORN_FULL, CFG)
        b = run(spec, MethodVariant.MORN_FULL, CFG)
        assert a.steps == b.steps
        assert a.outcomes == b.outcomes

    def test_trivial_fixture_completes_everything(self):
        spec = fixture_spec("trivial", [GoalSpec(1, "mug"), GoalSpec(2, "tv")])
        tr = run(spec, MethodVariant.MORN_FULL, CFG)
        assert tr.found_count == 2
        assert all(o.state is GoalState.COMPLETED for o in tr.outcomes.values())

    def test_sealed_fixture_fixed_order_pays_cap_morn_aborts(self):
        spec = fixture_spec("sealed", [GoalSpec(1, "mug", feasibility=SEALED),
                                       GoalSpec(2, "tv")])
        world = build_world(spec)
        fo = run(spec, MethodVariant.FIXED_ORDER, CFG, world=world)
        full = run(spec, MethodVariant.MORN_FULL, CFG, world=world)
        cap = 250  # even split of the 500 budget over 2 goals
        assert fo.outcomes[1].spent >= cap
        assert not fo.outcomes[1].aborted_by_meta
        assert full.outcomes[1].aborted_by_meta
        assert full.outcomes[1].spent < cap
        assert full.outcomes[2].found

    def test_baselines_never_use_meta_branches(self):
        for spec in small_suite(3, 1):
            for variant in (MethodVariant.FIXED_ORDER, MethodVariant.REACTIVE_ORDER):
                tr = run(spec, variant, CFG)
                for rec in tr.steps:
                    if rec.action in ("ABORT", "SWITCH"):
                        assert rec.reason == "SUBGOAL_CAP"
                    if rec.action == "COMMIT":
                        assert rec.reason == "EVIDENCE_COMMIT"

    def test_found_requires_true_proximity(self):
        for spec in small_suite(4, 2):
            world = build_world(spec)
            tr = run(spec, MethodVariant.MORN_FULL, CFG, world=world)
            for o in tr.outcomes.values():
                if o.found:
                    assert o.committed
                    assert world.goals[o.goal_id].present
                    assert o.commit_distance <= CFG.bench.success_radius


class TestMetrics:
    def test_hand_example(self):
        tr = synthetic_trace([True, False], [100, 400], total_steps=500)
        m = compute_metrics([tr])
        assert m.cr == 0.5
        assert m.mgsr == 0.0
        assert m.wsf == pytest.approx(0.8)
        assert m.mean_steps == 500

    def test_all_found(self):
        tr = synthetic_trace([True, True], [60, 70], total_steps=130)
        m = compute_metrics([tr])
        assert m.mgsr == 1.0 and m.wsf == 0.0 and m.cr == 1.0
        assert m.ssr == 1.0

    def test_none_found(self):
        tr = synthetic_trace([False, False], [250, 250], total_steps=500)
        m = compute_metrics([tr])
        assert m.cr == 0.0 and m.wsf == 1.0

    def test_ssr_requires_prescribed_order(self):
        tr = synthetic_trace([True, True], [60, 70], total_steps=130,
                             commit_sequence=[2, 1])
        assert compute_metrics([tr]).ssr == 0.0

    def test_utility(self):
        tr = synthetic_trace([True, False], [100, 400], total_steps=500)
        m = compute_metrics([tr], reward=2.0, lambda_cost=0.001)
        assert m.utility_mean == pytest.approx(2.0 - 0.5)

    def test_empty_rejected(self):
        with pytest.raises(InvalidCallError):
            compute_metrics([])

    def test_consistency_on_real_traces(self):
        specs = small_suite(4, 2)
        results = run_suite(specs, [MethodVariant.MORN_FULL], CFG)
        traces = results[MethodVariant.MORN_FULL]
        m = compute_metrics(traces)
        assert m.mgsr <= m.cr
        assert 0.0 <= m.wsf <= 1.0
        cr_oracle = sum(t.found_count / t.spec.goal_count for t in traces) / len(traces)
        assert m.cr == pytest.approx(cr_oracle)
        failed_goals = sum(1 for t in traces for o in t.outcomes.values()
                           if not o.found)
        assert sum(m.failure_counts.values()) == failed_goals

    def test_aggregation_is_order_independent(self):
        specs = small_suite(4, 2)
        traces = run_suite(specs, [MethodVariant.MORN_FULL], CFG)[MethodVariant.MORN_FULL]
        shuffled = traces[:]
        random.Random(0).shuffle(shuffled)
        a, b = compute_metrics(traces), compute_metrics(shuffled)
        # summation order may differ by an ulp; anything beyond that is a bug
        for x, y in zip((a.mgsr, a.ssr, a.cr, a.mean_steps, a.wsf, a.utility_mean),
                        (b.mgsr, b.ssr, b.cr, b.mean_steps, b.wsf, b.utility_mean)):
            assert x == pytest.approx(y, rel=1e-12)
        assert a.failure_counts == b.failure_counts


class TestFailureDecomposition:
    def test_all_success_is_all_zero(self):
        tr = synthetic_trace([True, True], [50, 50], total_steps=100)
        assert all(v == 0 for v in decompose_failures([tr]).values())

    def test_sealed_fixture_classes(self):
        spec = fixture_spec("sealed", [GoalSpec(1, "mug", feasibility=SEALED),
                                       GoalSpec(2, "tv")])
        world = build_world(spec)
        fo = decompose_failures([run(spec, MethodVariant.FIXED_ORDER, CFG, world=world)])
        full = decompose_failures([run(spec, MethodVariant.MORN_FULL, CFG, world=world)])
        assert fo["NO_DETECTION"] == 1 and fo["ABORTED"] == 0
        assert full["ABORTED"] == 1 and full["NO_DETECTION"] == 0

    def test_false_commit_dominates(self):
        tr = synthetic_trace([False], [90], total_steps=90, goal_count=1)
        tr.outcomes[1].committed = True
        assert decompose_failures([tr])["FALSE_COMMIT"] == 1


class TestSuiteAndSweep:
    def test_variants_share_worlds_and_specs(self):
        specs = small_suite(2, 1)
        results = run_suite(specs, [MethodVariant.FIXED_ORDER,
                                    MethodVariant.MORN_FULL], CFG)
        for fo, full in zip(results[MethodVariant.FIXED_ORDER],
                            results[MethodVariant.MORN_FULL]):
            assert fo.spec == full.spec

    def test_parallel_matches_serial(self):
        specs = small_suite(3, 0)
        serial = run_suite(specs, [MethodVariant.MORN_FULL], CFG)
        parallel = run_suite(specs, [MethodVariant.MORN_FULL], CFG, workers=2)
        for a, b in zip(serial[MethodVariant.MORN_FULL],
                        parallel[MethodVariant.MORN_FULL]):
            assert a.outcomes == b.outcomes
            assert a.total_steps == b.total_steps

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ConfigKeyError):
            sweep(small_suite(1, 0), MethodVariant.MORN_FULL, "tau_x", [0.1], CFG)

    def test_single_value_sweep_matches_direct_run(self):
        specs = small_suite(2, 0)
        table = sweep(specs, MethodVariant.MORN_FULL, "tau_c",
                      [CFG.thresholds.commit], CFG)
        direct = compute_metrics(run_suite(specs, [MethodVariant.MORN_FULL],
                                           CFG)[MethodVariant.MORN_FULL])
        assert len(table) == 1
        value, report = table[0]
        assert value == CFG.thresholds.commit
        assert report.cr == direct.cr and report.wsf == direct.wsf

    def test_zero_grace_sweep_runs(self):
        specs = small_suite(1, 0)
        table = sweep(specs, MethodVariant.MORN_FULL, "t_grace", [0.0], CFG)
        assert len(table) == 1
