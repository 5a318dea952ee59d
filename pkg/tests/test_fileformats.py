import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from glauberlearn.dynamics import BlockSchedule, m_regime_samples, run
from glauberlearn.fileformats import (
    FormatError,
    format_model,
    format_trajectory,
    parse_model,
    parse_node_samples,
    parse_trajectory,
    read_csv,
    read_model,
    read_node_samples,
    read_trajectory,
    spins_to_str,
    str_to_spins,
    write_csv,
    write_estimate,
    write_model,
    write_node_samples,
    write_trajectory,
)
from glauberlearn.generators import random_bounded_degree
from glauberlearn.ising import IsingModel
from glauberlearn.learner import REPORT_COLUMNS, Estimate


def test_spin_strings():
    assert spins_to_str([1, -1, -1, 1]) == "+--+"
    np.testing.assert_array_equal(str_to_spins("+--+"), [1, -1, -1, 1])
    for bad in ("", "+0-", "++ "):
        with pytest.raises(FormatError):
            str_to_spins(bad)


class TestModelFiles:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        for _ in range(10):
            m = random_model(rng, 6, scale=3.0)
            write_model(tmp_path / "m.txt", m)
            back = read_model(tmp_path / "m.txt")
            np.testing.assert_array_equal(back.couplings, m.couplings)
            np.testing.assert_array_equal(back.fields, m.fields)

    def test_example_text(self):
        m = parse_model("ising 3\n# a comment\nJ 1 2 0.25\nh 3 -0.5  # trailing\n")
        assert m.couplings[0, 1] == m.couplings[1, 0] == 0.25
        assert m.fields.tolist() == [0, 0, -0.5]

    def test_zero_entries_omitted(self):
        text = format_model(IsingModel.from_edges(4, {(1, 3): 0.5}))
        assert text.splitlines() == ["ising 4", "J 2 4 0.5"]

    @pytest.mark.parametrize("text", [
        "",
        "model 3\n",
        "ising x\n",
        "ising 3\nJ 2 1 0.5\n",
        "ising 3\nJ 1 4 0.5\n",
        "ising 3\nh 0 1.0\n",
        "ising 3\nJ 1 2\n",
        "ising 3\nK 1 2 3\n",
        "ising 3\nJ 1 2 abc\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(FormatError):
            parse_model(text)

    def test_estimate_header_and_provenance(self, tmp_path):
        A = np.array([[0, 0.3], [0.3, 0]])
        est = Estimate(A, np.array([0.1, 0]), A, (None, None), np.ones(2, dtype=bool),
                       {"radius": 1.5, "dynamics": "glauber"})
        write_estimate(tmp_path / "e.txt", est)
        text = (tmp_path / "e.txt").read_text()
        assert text.startswith("ising-estimate 2\n")
        assert "# dynamics=glauber" in text and "# radius=1.5" in text
        assert read_model(tmp_path / "e.txt").couplings[0, 1] == 0.3


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3),
       st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3))
def test_model_text_round_trip(upper, fields):
    A = np.zeros((3, 3))
    A[np.triu_indices(3, 1)] = upper
    m = IsingModel(A + A.T, fields)
    back = parse_model(format_model(m))
    np.testing.assert_array_equal(back.couplings, m.couplings)
    np.testing.assert_array_equal(back.fields, m.fields)


class TestTrajectoryFiles:
    def test_round_trip(self, tmp_path):
        m = random_bounded_degree(6, 2, 0.5, 0)
        traj = run(m, BlockSchedule.ell_block(2), np.ones(6), 200, 3)
        write_trajectory(tmp_path / "t.txt", traj)
        back = read_trajectory(tmp_path / "t.txt")
        np.testing.assert_array_equal(back.initial, traj.initial)
        np.testing.assert_array_equal(back.blocks, traj.blocks)
        np.testing.assert_array_equal(back.configs, traj.configs)
        assert back.schedule == traj.schedule
        assert back.seed == traj.seed == 3

    def test_layout(self):
        traj = run(IsingModel.zeros(3), BlockSchedule.round_robin(), -np.ones(3), 2, 0)
        lines = format_trajectory(traj).splitlines()
        assert lines[0].split()[:3] == ["traj", "3", "2"]
        assert lines[1] == "0 ---"
        assert lines[2].startswith("1 1 | ") and lines[3].startswith("2 2 | ")

    @pytest.mark.parametrize("text", [
        "",
        "traj 2 1 glauber\n0 ++\n1 1 | ++\n",
        "traj 2 2 glauber -\n0 ++\n1 1 | ++\n",
        "traj 2 1 glauber -\n0 ++\n1 3 | ++\n",
        "traj 2 1 glauber -\n0 ++\n1 1 ++\n",
        "traj 2 1 glauber -\n0 ++\n1 1 | +++\n",
        "traj 2 1 glauber -\n1 ++\n1 1 | ++\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(FormatError):
            parse_trajectory(text)


class TestNodeSampleFiles:
    def test_round_trip(self, tmp_path):
        sets = m_regime_samples(random_bounded_degree(6, 2, 0.5, 0), 0, 1, per_node=50)
        paths = write_node_samples(tmp_path / "s", sets)
        assert [p.name for p in paths][:2] == ["node0001.samples", "node0002.samples"]
        back = read_node_samples(tmp_path / "s")
        for a, b in zip(sets, back):
            assert a.node == b.node and a.source == b.source
            np.testing.assert_array_equal(a.contexts, b.contexts)
            np.testing.assert_array_equal(a.labels, b.labels)

    def test_missing_node(self, tmp_path):
        sets = m_regime_samples(IsingModel.zeros(3), 0, 1, per_node=5)
        write_node_samples(tmp_path, [sets[0], sets[2]])
        with pytest.raises(FormatError):
            read_node_samples(tmp_path)

    def test_empty_dir(self, tmp_path):
        with pytest.raises(FormatError):
            read_node_samples(tmp_path)

    def test_truncated(self):
        with pytest.raises(FormatError):
            parse_node_samples("samples 3 1 2 m_regime\n++ +\n")


class TestCSV:
    def test_header_and_blank_cells(self, tmp_path):
        p = tmp_path / "r.csv"
        write_csv(p, REPORT_COLUMNS, [{"n": 4, "dynamics": "glauber", "linf_A": 0.1, "tv_exact": None}])
        first, second = p.read_text().splitlines()
        assert first == "n,dynamics,T,radius,linf_A,linf_h,precision,recall,tv_exact,kl_bound,seed"
        assert second == "4,glauber,,,0.1,,,,,,"
        cols, rows = read_csv(p)
        assert tuple(cols) == REPORT_COLUMNS and rows[0]["linf_A"] == "0.1"
        assert not (tmp_path / "r.csv.tmp").exists()

    def test_float_round_trip(self, tmp_path):
        v = 0.1 + 0.2
        write_csv(tmp_path / "f.csv", ["x"], [{"x": np.float64(v)}])
        assert float(read_csv(tmp_path / "f.csv")[1][0]["x"]) == v
