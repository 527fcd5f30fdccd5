import pytest

from truncsim.engine import run_scenario
from truncsim.figures import build_figure, emit_figure, emit_figure_csv
from truncsim.metrics import summarize, type1_slice
from truncsim.report import write_summaries
from truncsim.scenario import build_core_grid


@pytest.fixture(scope="module")
def continuous_summaries():
    grid = build_core_grid("set1", "continuous", n_values=(50, 100),
                           or_values=(1.0, 1.2, 5.0), effect_values=(0.0, 116.0, 2900.0))
    return [summarize(run_scenario(s, 40, 19), s) for s in grid]


@pytest.fixture(scope="module")
def binary_summaries():
    grid = build_core_grid("set1", "binary", n_values=(100,), or_values=(1.0, 1.5),
                           effect_values=(1.0, 1.2))
    return [summarize(run_scenario(s, 40, 23), s) for s in grid]


def series_points(fig):
    points = []
    for ax in fig.axes:
        for line in ax.get_lines():
            points.extend(zip(line.get_xdata(), line.get_ydata()))
    return points


class TestBuildFigure:
    def test_type1_has_reference_line(self, continuous_summaries):
        null = type1_slice(continuous_summaries)
        fig = build_figure(null, "type1")
        ref_lines = [
            line for ax in fig.axes for line in ax.get_lines()
            if len(set(line.get_ydata())) == 1 and list(line.get_ydata())[0] == 0.05
        ]
        assert ref_lines

    def test_coverage_reference_line(self, continuous_summaries):
        fig = build_figure(continuous_summaries, "coverage")
        ys = {y for ax in fig.axes for line in ax.get_lines()
              for y in line.get_ydata() if len(set(line.get_ydata())) == 1}
        assert 0.95 in ys

    def test_facets_by_n_and_set(self, continuous_summaries):
        fig = build_figure(continuous_summaries, "bias")
        # one row (set1) x two columns (n=50, 100)
        assert len(fig.axes) == 2

    def test_extreme_values_excluded_by_default(self, continuous_summaries):
        fig = build_figure(continuous_summaries, "bias")
        xs = {x for x, _ in series_points(fig)}
        assert 5.0 not in xs
        fig_full = build_figure(continuous_summaries, "bias", include_extreme=True)
        xs_full = {x for x, _ in series_points(fig_full)}
        assert 5.0 in xs_full

    def test_single_summary_renders(self, binary_summaries):
        fig = build_figure(binary_summaries[:1], "ror")
        assert len(fig.axes) == 1
        assert len(series_points(fig)) >= 1

    def test_mixed_outcomes_rejected(self, continuous_summaries, binary_summaries):
        with pytest.raises(ValueError, match="mix"):
            build_figure(continuous_summaries + binary_summaries, "bias")

    def test_ror_requires_binary(self, continuous_summaries):
        with pytest.raises(ValueError, match="ror"):
            build_figure(continuous_summaries, "ror")

    def test_unknown_metric(self, continuous_summaries):
        with pytest.raises(ValueError, match="metric"):
            build_figure(continuous_summaries, "speed")

    def test_empty_input(self):
        with pytest.raises(ValueError):
            build_figure([], "bias")

    def test_missing_metric_values(self, binary_summaries):
        fig = build_figure(binary_summaries, "missing")
        for _, y in series_points(fig):
            assert 0.0 <= y <= 1.0


class TestEmitFigure:
    def test_writes_standalone_svg(self, tmp_path, binary_summaries):
        path = emit_figure(binary_summaries, "bias", tmp_path / "bias.svg")
        text = path.read_text()
        assert text.lstrip().startswith("<?xml")
        assert "<svg" in text
        # embedded text survives (fonts are not converted to paths)
        assert "Treatment effect on selection" in text

    def test_rerun_byte_identical(self, tmp_path, binary_summaries):
        a = emit_figure(binary_summaries, "coverage", tmp_path / "a.svg")
        b = emit_figure(binary_summaries, "coverage", tmp_path / "b.svg")
        assert a.read_bytes() == b.read_bytes()


class TestEmitFigureCsv:
    def test_round_trip_through_summary_csv(self, tmp_path, binary_summaries):
        write_summaries(binary_summaries, tmp_path, master_seed=23, iterations=40)
        out = emit_figure_csv(
            tmp_path / "summary_set1_core_binary.csv", "ror", tmp_path / "ror.svg"
        )
        assert out.exists() and out.stat().st_size > 0

    def test_type1_filters_to_null(self, tmp_path, binary_summaries):
        write_summaries(binary_summaries, tmp_path, master_seed=23, iterations=40)
        out = emit_figure_csv(
            tmp_path / "summary_set1_core_binary.csv", "type1", tmp_path / "t1.svg"
        )
        assert out.exists()
