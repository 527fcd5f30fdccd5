import math
import time

import numpy as np
import pytest

from truncsim import analysis
from truncsim.dgp import analysis_set, generate_trial
from truncsim.engine import derive_stream, run_grid, run_scenario
from truncsim.metrics import summarize
from truncsim.scenario import RunPlan

from test_dgp import binary_scenario
from test_scenario import make_scenario


class TestDeriveStream:
    def test_same_inputs_same_draws(self):
        a = derive_stream(9, "scenario-x", 4).random(100)
        b = derive_stream(9, "scenario-x", 4).random(100)
        assert np.array_equal(a, b)

    def test_adjacent_iterations_uncorrelated(self):
        n = 10_000
        a = derive_stream(9, "scenario-x", 7).random(n)
        b = derive_stream(9, "scenario-x", 8).random(n)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 3 / math.sqrt(n)

    def test_distinct_master_seeds_distinct_streams(self):
        first = {float(derive_stream(seed, "s", 0).random(1)[0]) for seed in range(10_000)}
        assert len(first) == 10_000

    def test_distinct_scenarios_distinct_streams(self):
        a = derive_stream(1, "scenario-a", 0).random(8)
        b = derive_stream(1, "scenario-b", 0).random(8)
        assert not np.array_equal(a, b)

    def test_iteration_index_beyond_32_bits(self):
        stream = derive_stream(1, "s", 2**40)
        assert stream.random(4).shape == (4,)


class TestRunScenario:
    def test_count_and_order(self):
        s = make_scenario(n=50)
        res = run_scenario(s, 37, 5)
        assert len(res) == 37
        assert [r.index for r in res] == list(range(37))
        assert all(r.scenario_id == s.id for r in res)

    def test_pure_function_of_inputs(self):
        s = make_scenario(n=50)
        r1 = run_scenario(s, 60, 5)
        r2 = run_scenario(s, 60, 5)
        assert r1 == r2
        r3 = run_scenario(s, 60, 6)
        assert r1 != r3

    def test_prefix_stable_when_iterations_grow(self):
        s = binary_scenario(n=50)
        short = run_scenario(s, 80, 11)
        long = run_scenario(s, 160, 11)
        assert long[:80] == short

    def test_block_boundaries_do_not_matter(self, monkeypatch):
        s = make_scenario(n=50)
        baseline = run_scenario(s, 50, 3)
        monkeypatch.setattr("truncsim.engine._BLOCK_ELEMENTS", 50 * 3 * 7)
        chunked = run_scenario(s, 50, 3)
        assert chunked == baseline

    def test_no_truncation_when_selection_saturated(self):
        s = make_scenario(n=100, intercept_s=20.0)
        res = run_scenario(s, 200, 13)
        assert all(r.n1 == r.n0 == 50 for r in res)

    def test_matches_per_trial_reference_continuous(self):
        s = make_scenario(n=80)
        engine_results = run_scenario(s, 50, 21)
        for i in (0, 7, 23, 49):
            trial = generate_trial(s, derive_stream(21, s.id, i))
            ref = analysis.mean_diff_ttest(analysis_set(trial))
            got = engine_results[i].estimate
            assert got.estimable == ref.estimable
            if ref.estimable:
                assert got.diff == pytest.approx(ref.diff, rel=1e-10)
                assert got.se == pytest.approx(ref.se, rel=1e-10)
                assert got.p_value == pytest.approx(ref.p_value, rel=1e-9)

    def test_matches_per_trial_reference_binary(self):
        s = binary_scenario(n=120)
        engine_results = run_scenario(s, 50, 22)
        for i in (0, 11, 30, 49):
            trial = generate_trial(s, derive_stream(22, s.id, i))
            table = analysis_set(trial)
            got = engine_results[i].estimate
            assert engine_results[i].n1 == table.n1
            assert engine_results[i].n0 == table.n0
            ref_or = analysis.log_odds_ratio(table)
            if ref_or is None:
                assert not got.or_estimable
            else:
                assert got.log_or == ref_or[0]
                assert got.wald_se == ref_or[1]
                lo, hi = analysis.profile_ci(table)
                assert got.profile_ci_low == pytest.approx(lo, abs=1e-10)
                assert got.profile_ci_high == pytest.approx(hi, abs=1e-10)
            ref_fisher = analysis.fisher_exact(table)
            if ref_fisher is None:
                assert not got.fisher_calculable
            else:
                assert got.p_fisher == pytest.approx(ref_fisher, abs=1e-12)

    def test_throughput_one_binary_core_scenario(self):
        # interactive-speed contract: a full-protocol binary cell on one core
        s = binary_scenario(n=1000)
        start = time.perf_counter()
        run_scenario(s, 10_000, 41)
        assert time.perf_counter() - start < 5.0

    def test_separation_shrinks_with_sample_size(self):
        small = binary_scenario(n=100, alpha_r=0.0)
        large = binary_scenario(n=1000, alpha_r=0.0)
        frac = {}
        for s in (small, large):
            res = run_scenario(s, 2000, 31)
            frac[s.n] = np.mean([not r.estimate.or_estimable for r in res])
        assert frac[100] > 0.0
        assert frac[1000] < frac[100]


class TestRunGrid:
    def make_plan(self, n_scenarios=3, **kw):
        scenarios = tuple(
            make_scenario(n=50, beta_r=58.0 * k) for k in range(n_scenarios)
        )
        defaults = dict(iterations=40, master_seed=17)
        defaults.update(kw)
        return RunPlan(scenarios=scenarios, **defaults)

    def test_emission_order_is_plan_order(self):
        plan = self.make_plan(3)
        out = list(run_grid(plan))
        assert [g.scenario.id for g in out] == [s.id for s in plan.scenarios]
        assert all(g.error is None and len(g.results) == 40 for g in out)

    def test_empty_plan_not_constructible(self):
        # RunPlan allows zero scenarios; the grid then yields nothing
        plan = RunPlan(scenarios=(), iterations=1, master_seed=0)
        assert list(run_grid(plan)) == []

    def test_thread_count_does_not_change_results(self):
        serial = [
            summarize(g.results, g.scenario)
            for g in run_grid(self.make_plan(4, threads=1))
        ]
        threaded = [
            summarize(g.results, g.scenario)
            for g in run_grid(self.make_plan(4, threads=3))
        ]
        assert serial == threaded

    def test_progress_lines(self):
        lines = []
        plan = self.make_plan(2)
        list(run_grid(plan, progress=lines.append))
        assert len(lines) == 2
        for line, scenario in zip(lines, plan.scenarios):
            sid, completed, elapsed = line.split("\t")
            assert sid == scenario.id
            assert int(completed) == 40
            assert float(elapsed) >= 0.0

    def test_scenario_failure_reported_not_raised(self, monkeypatch):
        plan = self.make_plan(2)
        failing_id = plan.scenarios[0].id
        real = run_scenario  # module-top import, bound before the patch

        def boom(scenario, iterations, master_seed):
            if scenario.id == failing_id:
                raise analysis.ProfileBracketError("synthetic failure")
            return real(scenario, iterations, master_seed)

        monkeypatch.setattr("truncsim.engine.run_scenario", boom)
        out = list(run_grid(plan))
        assert out[0].error is not None and "synthetic failure" in out[0].error
        assert out[0].results is None
        assert out[1].error is None and len(out[1].results) == 40
