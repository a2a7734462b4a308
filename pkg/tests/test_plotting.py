from bangbang.bench import BenchPoint
from bangbang.plotting import plot_bench, plot_pps_bars, plot_success_curve, plot_trace


def test_figures_written_and_reproducible(tmp_path):
    curve = [(1, 3, 0.9), (2, 5, 0.85)]
    a = plot_success_curve(curve, 0.8, tmp_path / "a.png", "t")
    b = plot_success_curve(curve, 0.8, tmp_path / "b.png", "t")
    assert a.read_bytes() == b.read_bytes()
    pts = [BenchPoint(2, 10, d, 1.0, 0.1 * d, 0.01) for d in (1.0, 0.5)]
    for path in (plot_bench(pts, tmp_path / "c.png"),
                 plot_pps_bars(["0", "1"], [0.5, -0.5], [0.4, -0.4], tmp_path / "d.png"),
                 plot_trace([0.1, 0.5, 0.6], tmp_path / "e" / "f.png")):
        assert path.read_bytes()[:4] == b"\x89PNG"
