import numpy as np
import pytest

from bangbang.bench import (
    CSV_COLUMNS,
    BenchPoint,
    bb_scaling,
    bench_point,
    bench_system,
    random_sequence,
    run_benchmark,
)
from bangbang.propagator import build_cache


def test_bench_system_is_weak_and_diagonal():
    sys_ = bench_system(5)
    assert sys_.n_species == 2 and sys_.weak_coupling
    assert build_cache(sys_).delay_is_diagonal


def test_random_sequence_duty_and_one_species():
    seq = random_sequence(100, 2, 0.2, np.random.default_rng(0))
    assert seq.duty_cycle == pytest.approx(0.2)
    assert seq.pulsed.sum(axis=1).max() == 1


def test_point_fields_and_zero_duty():
    pt = bench_point(2, 0.0, n_segments=20, repeats=1)
    assert pt.tau_sm > 0 and pt.tau_bb > 0 and pt.tau_cache > 0
    assert pt.ratio == pt.tau_sm / pt.tau_bb
    # SM still exponentiates every segment while BB only scales by U_d
    assert pt.ratio > 1
    assert len(pt.row()) == len(CSV_COLUMNS)


def test_grid_shape():
    pts = run_benchmark((2, 3), (1.0, 0.1), n_segments=10, repeats=1)
    assert [(p.n_spins, p.duty) for p in pts] == [(2, 1.0), (2, 0.1), (3, 1.0), (3, 0.1)]
    with pytest.raises(ValueError):
        run_benchmark((2,), (1.0,), repeats=0)


def test_ratio_grows_at_low_duty():
    hi = bench_point(4, 1.0, repeats=3)
    lo = bench_point(4, 0.1, repeats=3)
    assert lo.ratio > hi.ratio


def test_bb_time_linear_in_length():
    slope, r2 = bb_scaling(3, repeats=3)
    assert r2 >= 0.95
    assert 0.7 < slope < 1.3


def test_benchpoint_row():
    p = BenchPoint(2, 10, 0.5, 2.0, 0.5, 0.1)
    assert p.row() == (2, 10, 0.5, 2.0, 0.5, 0.1, 4.0)
