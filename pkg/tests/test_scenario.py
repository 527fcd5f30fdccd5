import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncsim.scenario import (
    RunPlan,
    Scenario,
    apply_sensitivity,
    bias_expected,
    build_core_grid,
    true_estimand,
)


def make_scenario(**overrides):
    fields = dict(
        set_tag="set1",
        sensitivity_tag="core",
        outcome_kind="continuous",
        n=100,
        intercept_s=math.log(0.2),
        alpha_r=math.log(1.2),
        alpha_u=math.log(0.8),
        alpha_ru=0.0,
        intercept_y=3300.0,
        beta_r=116.0,
        beta_u=-116.0,
        sigma_y=580.0,
    )
    fields.update(overrides)
    return Scenario(**fields)


class TestCoreGrid:
    @pytest.mark.parametrize("set_tag", ["set1", "set2"])
    @pytest.mark.parametrize("outcome", ["continuous", "binary"])
    def test_grid_size_and_unique_ids(self, set_tag, outcome):
        grid = build_core_grid(set_tag, outcome)
        assert len(grid) == 4 * 22 * 22 == 1936
        assert len({s.id for s in grid}) == 1936

    def test_binary_intercepts_and_event_rate(self):
        for s in build_core_grid("set1", "binary"):
            assert s.intercept_y == pytest.approx(math.log(0.1))
            # control outcome probability at u=0
            p = math.exp(s.intercept_y) / (1 + math.exp(s.intercept_y))
            assert p == pytest.approx(0.1 / 1.1)
            assert s.beta_u == pytest.approx(math.log(1.2))
            assert s.sigma_y is None

    def test_continuous_fixed_parameters(self):
        for s in build_core_grid("set1", "continuous"):
            assert s.intercept_s == pytest.approx(math.log(0.2))
            assert s.alpha_u == pytest.approx(math.log(0.8))
            assert s.intercept_y == 3300.0
            assert s.sigma_y == 580.0
            assert s.beta_u == -116.0
            assert s.alpha_ru == 0.0

    def test_set2_differs_only_in_interaction(self):
        set1 = build_core_grid("set1", "continuous")
        set2 = build_core_grid("set2", "continuous")
        for a, b in zip(set1, set2):
            assert b.alpha_ru == pytest.approx(math.log(0.8))
            assert (a.n, a.alpha_r, a.beta_r) == (b.n, b.alpha_r, b.beta_r)
            assert a.intercept_s == b.intercept_s
            assert a.alpha_u == b.alpha_u

    def test_or_grid_values(self):
        ors = sorted({s.selection_or for s in build_core_grid("set1", "binary")})
        assert ors == [(100 + 5 * k) / 100 for k in range(21)] + [5.0]

    def test_continuous_effect_grid(self):
        effects = sorted({s.beta_r for s in build_core_grid("set1", "continuous")})
        assert effects == [58.0 * k for k in range(21)] + [2900.0]

    def test_grid_overrides(self):
        grid = build_core_grid(
            "set1", "binary", n_values=(100,), or_values=(1.0, 2.0), effect_values=(1.2,)
        )
        assert len(grid) == 2
        assert {s.n for s in grid} == {100}


class TestSensitivity:
    def test_variant_a_binary(self):
        grid = apply_sensitivity(build_core_grid("set1", "binary"), "A")
        for s in grid:
            assert s.sensitivity_tag == "A"
            assert s.alpha_u == pytest.approx(math.log(0.5))
            assert s.beta_u == pytest.approx(math.log(1.5))
        # alpha_r grid untouched
        assert sorted({s.selection_or for s in grid})[-1] == 5.0

    def test_variant_a_continuous(self):
        grid = apply_sensitivity(build_core_grid("set1", "continuous"), "A")
        assert all(s.beta_u == -580.0 for s in grid)

    def test_variant_b_reciprocal(self):
        core = build_core_grid("set1", "binary")
        flipped = apply_sensitivity(core, "B")
        for a, b in zip(core, flipped):
            assert b.alpha_r == pytest.approx(-a.alpha_r)
        two = [s for s in core if s.selection_or == 2.0][0]
        two_b = apply_sensitivity([two], "B")[0]
        assert math.exp(two_b.alpha_r) == pytest.approx(0.5)

    def test_variant_c_event_rates(self):
        for s in apply_sensitivity(build_core_grid("set1", "binary"), "C"):
            assert s.intercept_s == 0.0
            assert s.intercept_y == 0.0
            # selection probability at r=0, u=0 is exactly one half
            assert 1.0 / (1.0 + math.exp(-s.intercept_s)) == 0.5
        for s in apply_sensitivity(build_core_grid("set1", "continuous"), "C"):
            assert s.intercept_s == 0.0
            assert s.intercept_y == 3300.0

    @pytest.mark.parametrize("variant", ["A", "C"])
    def test_idempotent_on_fields_it_sets(self, variant):
        once = apply_sensitivity(build_core_grid("set2", "binary"), variant)
        twice = apply_sensitivity(once, variant)
        assert once == twice

    @pytest.mark.parametrize("variant", ["A", "B", "C"])
    def test_cardinality_and_fresh_ids(self, variant):
        core = build_core_grid("set1", "continuous")
        out = apply_sensitivity(core, variant)
        assert len(out) == len(core)
        assert len({s.id for s in out}) == len(out)
        assert not {s.id for s in out} & {s.id for s in core}

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            apply_sensitivity(build_core_grid("set1", "binary"), "D")


class TestEstimandAndBias:
    def test_true_estimand_projects_beta_r(self):
        assert true_estimand(make_scenario(beta_r=116.0)) == 116.0
        binary = make_scenario(
            outcome_kind="binary", sigma_y=None, intercept_y=math.log(0.1),
            beta_r=math.log(1.2), beta_u=math.log(1.2),
        )
        assert true_estimand(binary) == pytest.approx(math.log(1.2))
        assert true_estimand(make_scenario(beta_r=0.0)) == 0.0

    def test_bias_expected_cases(self):
        assert bias_expected(
            make_scenario(alpha_r=math.log(1.2), alpha_u=math.log(0.8), beta_u=-116.0)
        )
        assert not bias_expected(make_scenario(alpha_r=0.0, alpha_ru=0.0))
        assert not bias_expected(make_scenario(alpha_r=math.log(2.0), alpha_u=0.0))
        # interaction alone is enough when confounder paths are live
        assert bias_expected(make_scenario(alpha_r=0.0, alpha_ru=math.log(0.8)))

    @given(
        alpha_u=st.floats(-2, 2, allow_nan=False),
        beta_u=st.floats(-600, 600, allow_nan=False),
    )
    def test_no_selection_effect_means_no_bias(self, alpha_u, beta_u):
        s = make_scenario(alpha_r=0.0, alpha_ru=0.0, alpha_u=alpha_u, beta_u=beta_u)
        assert not bias_expected(s)


class TestScenarioIdentity:
    def test_id_stable_and_distinct(self):
        a = make_scenario()
        assert a.id == make_scenario().id
        assert a.id != make_scenario(beta_r=117.0).id
        assert a.id != make_scenario(n=200).id
        assert a.id != make_scenario(sensitivity_tag="A").id

    @given(
        field=st.sampled_from(
            ["intercept_s", "alpha_r", "alpha_u", "alpha_ru", "beta_r", "beta_u", "beta_ru"]
        ),
        delta=st.floats(1e-9, 10, allow_nan=False),
    )
    @settings(max_examples=60)
    def test_field_perturbation_changes_id(self, field, delta):
        base = make_scenario()
        bumped = make_scenario(**{field: getattr(base, field) + delta})
        assert base.id != bumped.id

    def test_negative_zero_normalised(self):
        assert make_scenario(beta_r=0.0).id == make_scenario(beta_r=-0.0).id


class TestValidation:
    @pytest.mark.parametrize("n", [2, 3, 101, 0])
    def test_bad_n(self, n):
        with pytest.raises(ValueError):
            make_scenario(n=n)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            make_scenario(sigma_y=0.0)
        with pytest.raises(ValueError):
            make_scenario(sigma_y=None)

    def test_binary_with_sigma(self):
        with pytest.raises(ValueError):
            make_scenario(outcome_kind="binary", sigma_y=580.0)

    def test_bad_tags(self):
        with pytest.raises(ValueError):
            make_scenario(set_tag="set3")
        with pytest.raises(ValueError):
            make_scenario(sensitivity_tag="D")
        with pytest.raises(ValueError):
            make_scenario(outcome_kind="count")

    def test_nonfinite_field(self):
        with pytest.raises(ValueError):
            make_scenario(beta_r=math.inf)


class TestRunPlan:
    def test_valid_plan(self):
        plan = RunPlan(scenarios=(make_scenario(),), iterations=10, master_seed=1)
        assert plan.iterations == 10

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            RunPlan(scenarios=(make_scenario(), make_scenario()), iterations=1)

    def test_bad_iterations(self):
        with pytest.raises(ValueError):
            RunPlan(scenarios=(make_scenario(),), iterations=0)

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            RunPlan(scenarios=(make_scenario(),), master_seed=-1)
        with pytest.raises(ValueError):
            RunPlan(scenarios=(make_scenario(),), master_seed=2**64)
