import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bangbang.fileio import (
    FormatError,
    emit_matrix,
    emit_sequence,
    load_ga_config,
    load_system,
    parse_matrix,
    parse_sequence,
    read_csv,
    save_system,
    system_from_dict,
    system_to_dict,
    write_columns,
    write_csv,
    write_json,
)
from bangbang.gaopt import GAConfig
from bangbang.propagator import BBSequence
from bangbang.spinsys import Species, SpinSystem, demo_two_spin

GOOD = """# bang-bang sequence
dt 5e-06
segments 3
species H F
D D
P:90 D
D P:270.5
twirls 1 3
"""


def test_parse_example():
    seq, labels = parse_sequence(GOOD)
    assert labels == ["H", "F"]
    assert seq.n_segments == 3 and seq.twirls == (1, 3)
    assert seq.pulsed.tolist() == [[False, False], [True, False], [False, True]]
    assert seq.phases[1, 0] == pytest.approx(np.pi / 2)
    assert emit_sequence(seq, labels) == GOOD


@given(st.integers(0, 2**32 - 1), st.integers(0, 30), st.integers(1, 3))
def test_sequence_round_trip(seed, k, nj):
    rng = np.random.default_rng(seed)
    pulsed = rng.random((k, nj)) < 0.4
    tw = tuple(sorted(set(rng.integers(0, k + 1, 2).tolist())))
    seq = BBSequence(float(rng.uniform(1e-7, 1e-4)), pulsed, rng.uniform(0, 2 * np.pi, (k, nj)), tw)
    back, _ = parse_sequence(emit_sequence(seq))
    assert back.dt == seq.dt
    assert back.twirls == seq.twirls
    assert np.array_equal(back.pulsed, seq.pulsed)
    assert np.allclose(back.phases, seq.phases, rtol=0, atol=1e-10)
    # a second pass through the text is exact
    assert emit_sequence(back) == emit_sequence(seq)


@pytest.mark.parametrize("text, line, fragment", [
    ("dt x\nsegments 1\nspecies H\nD\ntwirls\n", 1, "malformed"),
    ("segments 1\n", 1, "expected 'dt'"),
    ("dt 1e-6\nsegments 2\nspecies H\nD\ntwirls\n", 4, "declares 2"),
    ("dt 1e-6\nsegments 1\nspecies H F\nD\ntwirls\n", 4, "expected 2 tokens"),
    ("dt 1e-6\nsegments 1\nspecies H\nX\ntwirls\n", 4, "bad event"),
    ("dt 1e-6\nsegments 1\nspecies H\nP:abc\ntwirls\n", 4, "bad phase"),
    ("dt 1e-6\nsegments 1\nspecies H\nP:nan\ntwirls\n", 4, "non-finite"),
    ("dt 1e-6\nsegments 1\nspecies H\nD\n", 4, "twirls"),
    ("dt 1e-6\nsegments 1\nspecies H\nD\ntwirls 5\n", 5, "twirl"),
])
def test_sequence_parse_errors(text, line, fragment):
    with pytest.raises(FormatError) as exc:
        parse_sequence(text, "f.seq")
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"f.seq:{line}:")


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_matrix_round_trip_exact(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert np.array_equal(parse_matrix(emit_matrix(m)), m)


def test_matrix_errors():
    with pytest.raises(FormatError):
        parse_matrix("1,0 0,0\n0,0\n")
    with pytest.raises(FormatError):
        parse_matrix("1,0 0,0\n")
    with pytest.raises(FormatError):
        parse_matrix("1;0\n")
    with pytest.raises(FormatError):
        parse_matrix("# nothing\n")


def test_system_round_trip(tmp_path):
    sys_ = demo_two_spin()
    save_system(sys_, tmp_path / "s.json")
    assert load_system(tmp_path / "s.json") == sys_
    odd = SpinSystem(3, (Species("A", 1234.5678, (0, 2)), Species("B", 99.0, (1,))),
                     [1.23456789, -987.654321, 0.0], [[0, 3.5, 0], [3.5, 0, 1.25], [0, 1.25, 0]],
                     [[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]], weak_coupling=False)
    back = system_from_dict(json.loads(json.dumps(system_to_dict(odd))))
    assert back.species[0].members == (0, 2) and not back.weak_coupling
    assert np.allclose(back.offsets, odd.offsets, rtol=1e-11, atol=0)
    assert np.array_equal(back.j_couplings, odd.j_couplings)


def test_bad_system_and_config_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"spins": 2,\n "species": [}')
    with pytest.raises(FormatError) as exc:
        load_system(p)
    assert exc.value.line == 2
    p.write_text('{"spins": 2}')
    with pytest.raises(FormatError, match="missing keys"):
        load_system(p)
    p.write_text('{"population": 1}')
    with pytest.raises(FormatError, match="population"):
        load_ga_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_ga_config(p)


def test_ga_config_file(tmp_path):
    p = tmp_path / "ga.json"
    write_json(p, {"population": 10, "seed": 7, "rf_scales": [1.0]})
    cfg = load_ga_config(p)
    assert cfg.population == 10 and cfg.rf_scales == (1.0,) and cfg.generations == GAConfig().generations


def test_csv_and_columns(tmp_path):
    write_csv(tmp_path / "a.csv", ("x", "y"), [(1, 0.1), (2, np.float64(1 / 3))])
    rows = read_csv(tmp_path / "a.csv")
    assert rows[1] == {"x": "2", "y": repr(1 / 3)}
    write_columns(tmp_path / "a.dat", ([1, 2], [3.5, 4.5]), "x y")
    assert (tmp_path / "a.dat").read_text() == "# x y\n1.0 3.5\n2.0 4.5\n"
    assert not list(tmp_path.glob(".*"))
