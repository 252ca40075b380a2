import math

from ibclab.workers import sweeper
from ibclab.workers.sweeper import evaluate_scalar_point, evaluate_setting_point, quadruples, run_sweep


def test_degenerate_points_are_skipped():
    points = quadruples([0, 1], [0, 2], [1], [0])
    assert (0, 0, 1, 0) not in points
    assert len(points) == 3


def test_rows_do_not_depend_on_point_order():
    points = quadruples([-1.0, 0.0, 1.0], [0.0, 1.0, 2.0], [1.0], [0.0])
    forward = run_sweep(points, evaluate_scalar_point, n_jobs=1, lam=-1.0)
    backward = run_sweep(points[::-1], evaluate_scalar_point, n_jobs=1, lam=-1.0)
    assert forward == backward
    assert [row["alpha_re"] for row in forward] == sorted(row["alpha_re"] for row in forward)


def test_parallel_sweep_matches_serial():
    points = quadruples([0.0, 1.0], [1.0, 2.0], [1.0], [0.0])
    assert run_sweep(points, evaluate_scalar_point, n_jobs=2, lam=-4.0) == run_sweep(
        points, evaluate_scalar_point, n_jobs=1, lam=-4.0
    )


def test_setting_point_rows(seeded):
    lam = seeded.lambda0 + 1j
    symmetric = evaluate_setting_point((-1.0, 2.0, 0.5, 0.0), seeded, lam, 1e-8)
    assert symmetric["symmetric"] and symmetric["passed"]
    assert symmetric["hermiticity"] <= 1e-10
    assert symmetric["resolvent_deviation"] <= 1e-8

    skewed = evaluate_setting_point((0.0, 1.0, 1j, 0.0), seeded, lam, 1e-8)
    assert not skewed["symmetric"]
    assert math.isnan(skewed["resolvent_deviation"])
    assert skewed["passed"]


def test_logger_is_named_after_module():
    assert sweeper.logger.name == "ibclab.workers.sweeper"
