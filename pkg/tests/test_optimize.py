import numpy as np
import pytest

from stapulse.core import ValidationError
from stapulse.optimize import (
    Evaluation,
    Objective,
    ScanPlan,
    coefficients_from_dict,
    coefficients_to_dict,
    coordinate_scan,
    default_plan,
    evaluate,
    range_values,
    read_coefficients,
    write_coefficients,
    write_scan_log,
)
from stapulse.synthesis import TargetState, TaskKind, solve_constraint

SMALL = ScanPlan(
    ranges={"a2": (-1.2, -1.0, 0.1), "a6": (0.04, 0.08, 0.02), "a8": (0.0, 0.02, 0.02)},
    refine_values=(0.06,),
)


def test_combine_arithmetic():
    assert Objective().combine(0.99, 0.05) == pytest.approx(0.01 + 10 * 0.03, abs=1e-15)
    assert Objective().combine(0.99, 0.05) == pytest.approx(0.31)


def test_perfect_is_zero():
    assert Objective().combine(1.0, 0.0) == 0.0


def test_objective_validation():
    with pytest.raises(ValidationError):
        Objective(fidelity_window=0.0)
    with pytest.raises(ValidationError):
        Objective(penalty_weight=-1.0)
    with pytest.raises(ValidationError):
        Objective(excitation_limit=3.0)


def test_objective_grids():
    o = Objective()
    w = o.window_grid()
    assert w[0] == -0.17 and w[-1] == 0.17 and len(w) == 35
    e = o.excitation_grid()
    assert e.min() == -10 and e.max() == 10 and np.abs(e).min() == 3.5 and len(e) == 2 * 131


def test_row1_score(row1):
    ev = evaluate(row1)
    assert ev.score < 0.005
    assert ev.score == pytest.approx(Objective().combine(1 - ev.mean_infidelity, ev.max_offres_pop0))


def test_range_values():
    np.testing.assert_array_equal(range_values(-0.06, 0.06, 0.02), [-0.06, -0.04, -0.02, 0.0, 0.02, 0.04, 0.06])
    assert len(range_values(-1.5, -0.7, 0.05)) == 17
    np.testing.assert_array_equal(range_values(0.5, 0.5, 0.1), [0.5])
    with pytest.raises(ValidationError):
        range_values(0, 1, 0)
    with pytest.raises(ValidationError):
        range_values(1, 0, 0.1)


def test_plan_validation():
    with pytest.raises(ValidationError):
        ScanPlan(order=("a2", "a4"), ranges={"a2": (0, 1, 0.5), "a4": (0, 1, 0.5)})
    with pytest.raises(ValidationError):
        ScanPlan(order=("a2",), ranges={})
    with pytest.raises(ValidationError):
        ScanPlan(ranges={"a2": (0, 1, -0.1), "a6": (0, 1, 0.5), "a8": (0, 1, 0.5)})


def test_default_plans_bracket_table():
    from stapulse.synthesis import TABLE_COEFFICIENTS

    for task in TaskKind:
        plan = default_plan(task)
        for name, value in TABLE_COEFFICIENTS[task].items():
            lo, hi, _ = plan.ranges[name]
            assert lo <= value <= hi
    assert default_plan(TaskKind.CREATE_ASQS).evaluation_count() == 17 + 9 + 7 + 5 * 7


def test_single_point_plan():
    plan = ScanPlan(ranges={"a2": (-1.1, -1.1, 0.05), "a6": (0.06, 0.06, 0.02), "a8": (0.02, 0.02, 0.02)}, refine_values=())
    res = coordinate_scan(TaskKind.CREATE_ASQS, plan)
    c = res.best.coeffs
    assert (c["a2"], c["a6"], c["a8"]) == (-1.1, 0.06, 0.02)
    assert c["a4"] == pytest.approx(0.17, abs=1e-12)
    assert len(res.log) == 3


@pytest.fixture(scope="module")
def small_scan():
    return coordinate_scan(TaskKind.CREATE_ASQS, SMALL)


def test_log_complete(small_scan):
    assert len(small_scan.log) == SMALL.evaluation_count() == 3 + 3 + 2 + 2
    assert [e.step for e in small_scan.log[:3]] == ["scan_a2"] * 3
    assert small_scan.log[-1].step == "refine_a6=0.06"


def test_monotone(small_scan):
    scores = [s for _, s in small_scan.best_after_step]
    assert all(b <= a for a, b in zip(scores, scores[1:]))
    assert small_scan.best.score == min(e.score for e in small_scan.log)


def test_reproducible(small_scan):
    again = coordinate_scan(TaskKind.CREATE_ASQS, SMALL)
    assert again.best.coeffs == small_scan.best.coeffs
    assert [e.score for e in again.log] == [e.score for e in small_scan.log]


def test_parallel_scan_matches(small_scan):
    par = coordinate_scan(TaskKind.CREATE_ASQS, SMALL, jobs=2)
    assert [e.score for e in par.log] == [e.score for e in small_scan.log]


def test_tie_break_prefers_small_magnitudes(monkeypatch):
    import stapulse.optimize as opt

    def flat(coeffs, objective, step):
        return Evaluation(coeffs, 0.0, 0.0, 0.0)

    monkeypatch.setattr(opt, "evaluate", flat)
    plan = ScanPlan(ranges={"a2": (-0.2, 0.2, 0.1), "a6": (-0.04, 0.04, 0.02), "a8": (-0.02, 0.02, 0.02)}, refine_values=())
    c = opt.coordinate_scan(TaskKind.CREATE_ASQS, plan).best.coeffs
    assert (c["a2"], c["a6"], c["a8"]) == (0.0, 0.0, 0.0)


def test_scan_log_csv(tmp_path, small_scan):
    path = tmp_path / "log.csv"
    write_scan_log(small_scan, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,a2,a4,a6,a8,mean_infidelity,max_offres_pop0,score"
    assert len(lines) == 1 + len(small_scan.log)


def test_coefficients_yaml_round_trip(tmp_path):
    c = solve_constraint(TaskKind.RETURN_TO_ONE, {"a2": 1.06, "a6": 0.16, "a8": 0.0}, tf=3.0, target=TargetState(0.4, 1.1))
    path = tmp_path / "c.yaml"
    write_coefficients(c, path)
    assert read_coefficients(path) == c
    assert coefficients_from_dict(coefficients_to_dict(c)) == c
