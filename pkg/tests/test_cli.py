import json
import math

import pytest

from jctraj import cli
from jctraj.cli import EXIT_CONFIG, EXIT_NUMERICAL, ExperimentConfig, main, resolve


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    columns = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, columns, rows


class TestConfig:
    def test_fig3_echo(self, capsys):
        code, out, _ = run(capsys, "config", "fig3")
        echo = json.loads(out)
        assert code == 0
        assert echo["gamma_list"] == [0.02, 0.2, 2.0, 20.0, 200.0]
        assert [r["F"] for r in echo["runs"]] == [g / 2 for g in echo["gamma_list"]]
        assert echo["trajectories"] == 10_000 and echo["seed"] == 42

    def test_custom_needs_gamma(self, capsys):
        code, _, err = run(capsys, "run", "custom")
        assert code == EXIT_CONFIG
        assert "gamma" in err

    def test_coarse_dt_rejected(self, capsys):
        code, _, err = run(capsys, "run", "custom", "--gamma", "200", "--dt", "0.5")
        assert code == EXIT_CONFIG
        assert "dt" in err

    @pytest.mark.parametrize("args", [
        ["--gamma", "-1"],
        ["--gamma", "2", "--seed", "-3"],
        ["--gamma", "2", "--trajectories", "0"],
        ["--gamma", "2", "--t-final", "1", "--t-star", "2"],
    ])
    def test_invalid_values(self, capsys, args):
        assert run(capsys, "run", "custom", *args)[0] == EXIT_CONFIG

    def test_preset_defaults_survive_overrides(self):
        c = resolve(ExperimentConfig("fig1", gamma_list=[2.0], trajectories=50))
        assert c.gamma_list == [2.0] and c.t_final == math.pi and c.seed == 42

    def test_gamma_list_parsing(self):
        assert cli._gamma_values(["0.2,2", "20"]) == [0.2, 2.0, 20.0]


class TestRun:
    def test_fig1_columns(self, capsys):
        code, out, _ = run(capsys, "run", "fig1", "--gamma", "2", "--trajectories", "20", "--samples", "5")
        header, columns, rows = parse_csv(out)
        assert code == 0
        assert columns == ["gamma", "t", "delta", "delta_s", "delta_f", "F_c"]
        assert len(rows) == 5 and all(len(r) == 6 for r in rows)
        assert float(rows[0][2]) == pytest.approx(1.0, abs=1e-12)
        assert header["preset"] == "fig1"

    def test_json_output(self, capsys):
        code, out, _ = run(capsys, "run", "fig4", "--gamma", "2", "--samples", "4", "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["columns"] == ["gamma", "t", "x", "y", "z"]
        assert len(doc["rows"]) == 4
        assert doc["rows"][0][2:] == [0.0, 0.0, -1.0]

    def test_fig6_rows_and_trend(self, capsys):
        code, out, _ = run(capsys, "run", "fig6", "--trajectories", "100")
        _, columns, rows = parse_csv(out)
        assert code == 0 and len(rows) == 5
        de = [float(r[columns.index("delta_e")]) for r in rows]
        assert all(a > b for a, b in zip(de, de[1:]))

    def test_custom_single_trajectory(self, capsys):
        code, out, _ = run(capsys, "run", "custom", "--gamma", "2", "--F", "1", "--t-final", "3.14159",
                           "--trajectories", "1", "--samples", "10")
        _, columns, rows = parse_csv(out)
        assert code == 0
        assert columns == ["gamma", "t", "event", "entropy", "jump_count"]
        jumps = [r for r in rows if r[2] == "jump"]
        samples = [r for r in rows if r[2] == "sample"]
        assert len(samples) == 10
        assert [int(r[4]) for r in jumps] == list(range(1, len(jumps) + 1))

    def test_fig5_single_trajectory_jumps(self, capsys):
        code, out, _ = run(capsys, "run", "fig5", "--samples", "50")
        _, columns, rows = parse_csv(out)
        assert code == 0
        counts = [int(r[columns.index("jump_count")]) for r in rows]
        assert counts == sorted(counts) and counts[-1] > 0

    def test_seconds_column(self, capsys):
        _, out, _ = run(capsys, "run", "fig4", "--gamma", "2", "--samples", "3", "--g-hz")
        _, columns, rows = parse_csv(out)
        assert columns[-1] == "t_seconds"
        assert float(rows[-1][-1]) == pytest.approx(math.pi / 1e4)

    def test_truncation_exit_code(self, capsys):
        # alpha = 2F/(i gamma) = -20i does not fit in 16 levels
        code, _, err = run(capsys, "run", "custom", "--gamma", "0.1", "--F", "1", "--trajectories", "2")
        assert code == EXIT_NUMERICAL
        assert "truncation" in err

    def test_replay_is_byte_identical(self, capsys, tmp_path):
        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        assert main(["run", "fig3", "--gamma", "0.2,2", "--trajectories", "70", "--seed", "5",
                     "--samples", "6", "--output", str(first)]) == 0
        assert main(["replay", str(first), "--output", str(second)]) == 0
        capsys.readouterr()
        assert first.read_bytes() == second.read_bytes()

    def test_workers_do_not_change_output(self, capsys):
        base = ["run", "fig2", "--gamma", "2", "--trajectories", "130", "--samples", "4"]
        _, one, _ = run(capsys, *base)
        _, two, _ = run(capsys, *base, "--workers", "2")
        assert one == two
