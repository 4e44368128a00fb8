"""Convergence curves and their CSV rendering."""
import numpy as np
import pytest

from dcnopt.report import compute_curves, curves_to_csv
from dcnopt.store import RunHeader, Trial, TrialDatabase

HEADER = RunHeader(space_name="s", space_version=1, master_seed=0, config_digest="x")


def _db(errors, branches=None):
    branches = branches or ["random"] * len(errors)
    trials = [
        Trial(id=i, assignment={"x": 0.0}, error=e, branch=b)
        for i, (e, b) in enumerate(zip(errors, branches))
    ]
    return TrialDatabase(header=HEADER, trials=trials)


def _curves_oracle(errors, window):
    """O(n^2) re-scan, independent of compute_curves internals."""
    out = []
    for i in range(len(errors)):
        tail = errors[max(0, i + 1 - window): i + 1]
        mean = sum(tail) / len(tail)
        std = (sum((e - mean) ** 2 for e in tail) / len(tail)) ** 0.5
        out.append((mean, std, min(errors[: i + 1])))
    return out


class TestComputeCurves:
    def test_truncated_window_means(self):
        points = compute_curves(_db([0.5, 0.4, 0.3]), window=10)
        assert [p.mean for p in points] == pytest.approx([0.5, 0.45, 0.4])
        assert [p.minimum for p in points] == pytest.approx([0.5, 0.4, 0.3])

    def test_running_min_is_non_increasing(self):
        points = compute_curves(_db([0.5, 0.6, 0.4]), window=10)
        assert [p.minimum for p in points] == pytest.approx([0.5, 0.5, 0.4])

    def test_std_is_population_and_zero_for_single_point(self):
        points = compute_curves(_db([0.5, 0.1]), window=10)
        assert points[0].std == 0.0
        assert points[1].std == pytest.approx(0.2)  # population std of {0.5, 0.1}

    def test_window_flag_limits_the_tail(self):
        points = compute_curves(_db([1.0, 0.0, 0.0, 0.0]), window=2)
        assert points[3].mean == pytest.approx(0.0)
        assert points[1].mean == pytest.approx(0.5)

    def test_matches_brute_force_oracle_on_random_errors(self):
        rng = np.random.default_rng(8)
        errors = [float(e) for e in rng.uniform(size=200)]
        points = compute_curves(_db(errors), window=10)
        for p, (mean, std, minimum) in zip(points, _curves_oracle(errors, 10)):
            assert p.mean == pytest.approx(mean, abs=1e-12)
            assert p.std == pytest.approx(std, abs=1e-12)
            assert p.minimum == pytest.approx(minimum, abs=1e-12)

    def test_empty_db_rejected(self):
        with pytest.raises(ValueError):
            compute_curves(_db([]))

    def test_branch_tags_carried_through(self):
        points = compute_curves(_db([0.5, 0.4], branches=["random", "tpe"]))
        assert [p.branch for p in points] == ["random", "tpe"]


class TestCsv:
    def test_header_and_row_count(self):
        text = curves_to_csv(compute_curves(_db([0.5, 0.4, 0.3])))
        lines = text.strip().split("\n")
        assert lines[0] == "i,mean,std,min,branch"
        assert len(lines) == 4

    def test_values_round_trip_exactly(self):
        rng = np.random.default_rng(9)
        errors = [float(e) for e in rng.uniform(size=50)]
        points = compute_curves(_db(errors))
        text = curves_to_csv(points)
        for line, p in zip(text.strip().split("\n")[1:], points):
            i, mean, std, minimum, branch = line.split(",")
            assert int(i) == p.iteration
            assert float(mean) == p.mean
            assert float(std) == p.std
            assert float(minimum) == p.minimum
            assert branch == p.branch

    def test_lf_endings_and_dot_decimal(self):
        text = curves_to_csv(compute_curves(_db([0.25])))
        assert "\r" not in text
        assert text.endswith("\n")
        assert "0.25" in text
