import csv
import dataclasses
import io
import math

import pytest

from decoyqkd import batch, cli
from decoyqkd.channel import ChannelParams, SourceParams, expected_counts, simulate_rates
from decoyqkd.config import (ConfigError, RunConfig, ingest_counts, load_config,
                             parse_config, parse_counts, save_config, serialize_config,
                             write_counts)

SMALL = dict(distance_start=0.0, distance_stop=240.0, distance_step=60.0)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestConfig:
    def test_round_trip_defaults(self):
        cfg = RunConfig()
        assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_custom(self, tmp_path):
        cfg = RunConfig(mu=0.55, nu=0.1 / 3, p_mu=0.9, p_nu=0.1, N=(1e9, 1e11, math.inf),
                        methods=("improved",), mode="published", seed=42, epsilon=1e-9,
                        distance_step=0.5, trial_csv="t.csv")
        path = tmp_path / "run.cfg"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\nmu = 0.5   # signal\nmethods = improved, one-decoy\n")
        assert cfg.mu == 0.5 and cfg.methods == ("improved", "one-decoy")

    def test_empty_methods(self):
        assert parse_config("methods =\n").methods == ()

    @pytest.mark.parametrize("text, field", [
        ("mu = abc\n", "mu"),
        ("bogus = 1\n", "bogus"),
        ("distance_step = 0\n", "distance_step"),
        ("methods = improved, magic\n", "methods"),
        ("mode = fancy\n", "mode"),
        ("N = 1e9, -5\n", "N"),
        ("epsilon = 2\n", "epsilon"),
        ("vacuum_split = 0.5, 0.5\n", "vacuum_split"),
        ("just text\n", "line 1"),
        ("distance_start = 10\ndistance_stop = 5\n", "distance_stop"),
    ])
    def test_errors_name_the_field(self, text, field):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.field == field

    def test_bad_source(self):
        with pytest.raises(ConfigError):
            parse_config("mu = 0.1\nnu = 0.2\n")

    def test_distances(self):
        assert RunConfig(**SMALL).distances() == [0.0, 60.0, 120.0, 180.0, 240.0]
        assert RunConfig(distance_start=1, distance_stop=1.3, distance_step=0.1).distances() \
            == [1.0, 1.1, 1.2, 1.3]


class TestCounts:
    def counts(self, vacuum=False):
        src = SourceParams.with_vacuum() if vacuum else SourceParams()
        ch = ChannelParams(120)
        return expected_counts(src, simulate_rates(src, ch), 1e11, ch.Y0)

    def test_round_trip(self, tmp_path):
        for vac in (False, True):
            c = self.counts(vac)
            path = tmp_path / f"c{vac}.csv"
            write_counts(c, str(path))
            assert ingest_counts(str(path)) == c

    def test_round_trip_rate_identity(self, tmp_path):
        c = self.counts(True)
        path = tmp_path / "c.csv"
        write_counts(c, str(path))
        cfg = RunConfig()
        assert batch.rate_from_counts(cfg, ingest_counts(str(path))) == \
            batch.rate_from_counts(cfg, c)

    def test_invariant_breach(self):
        with pytest.raises(ConfigError, match="rejected"):
            parse_counts([{"N": "10", "N_mu": "6", "N_nu": "4", "n_mu": "2", "n_nu": "1",
                           "m_mu": "3", "m_nu": "0"}])

    @pytest.mark.parametrize("row, field", [
        ({"N": "10", "N_mu": "6", "N_nu": "4", "n_mu": "2", "n_nu": "1", "m_mu": "1"}, "m_nu"),
        ({"N": "10", "N_mu": "6", "N_nu": "4", "n_mu": "x", "n_nu": "1", "m_mu": "1",
          "m_nu": "0"}, "n_mu"),
        ({"N": "10", "N_mu": "6", "N_nu": "4", "n_mu": "2", "n_nu": "-1", "m_mu": "1",
          "m_nu": "0"}, "n_nu"),
        ({"N": "10", "N_mu": "6", "N_nu": "4", "n_mu": "2", "n_nu": "1", "m_mu": "1",
          "m_nu": "0", "extra": "1"}, "extra"),
    ])
    def test_schema_errors(self, row, field):
        with pytest.raises(ConfigError) as info:
            parse_counts([row])
        assert info.value.field == field

    def test_record_count(self):
        with pytest.raises(ConfigError):
            parse_counts([])


class TestBatch:
    def test_scan_columns_and_rows(self):
        cfg = RunConfig(N=(1e11, math.inf), **SMALL)
        rows = rows_of(batch.run_scan(cfg))
        assert tuple(rows[0]) == batch.SCAN_COLUMNS
        assert len(rows) == 10
        assert [r["distance_km"] for r in rows[:5]] == ["0", "60", "120", "180", "240"]
        assert rows[0]["R_infinite-decoy"]  # asymptotic reference in every row

    def test_empty_methods_header_only(self):
        text = batch.run_scan(RunConfig(methods=()))
        assert text == ",".join(batch.SCAN_COLUMNS) + "\n"

    def test_missing_methods_left_empty(self):
        rows = rows_of(batch.run_scan(RunConfig(methods=("improved",), **SMALL)))
        assert all(r["R_one-decoy"] == "" and r["R_improved"] != "" for r in rows)

    def test_rate_floor(self):
        assert batch.fmt_rate(1e-16) == "0" and batch.fmt_rate(2e-15) == "2e-15"
        assert batch.fmt(math.nan) == "" and batch.fmt(1 / 3) == "0.333333333333"

    def test_asymptotic_correction_changes_sign(self):
        cfg = RunConfig(N=(math.inf,), distance_step=20.0)
        corr = [float(r["correction"]) for r in rows_of(batch.run_scan(cfg))]
        assert corr[0] < 0 < corr[-1]

    def test_parallel_matches_serial(self):
        cfg = RunConfig(N=(1e10, 1e12), **SMALL)
        assert batch.run_scan(cfg, workers=3) == batch.run_scan(cfg)

    def test_deterministic(self):
        cfg = RunConfig(**SMALL)
        assert batch.run_scan(cfg) == batch.run_scan(cfg)

    def test_max_distance_single_row(self):
        rows = rows_of(batch.run_max_distance(RunConfig(methods=("improved",))))
        assert len(rows) == 1 and float(rows[0]["L_improved"]) > 200
        assert int(rows[0]["evals_improved"]) > 10

    def test_max_distance_needs_N(self):
        with pytest.raises(ValueError):
            batch.run_max_distance(RunConfig(N=()))

    def test_validate_summary(self):
        cfg = RunConfig(trials=1000, validate_epsilon=0.05, seed=3)
        s1, t1 = batch.run_validate(cfg)
        s2, t2 = batch.run_validate(cfg)
        assert t1 == t2 and s1 == s2
        row = rows_of(t1)[0]
        assert row["trials"] == "1000" and float(row["wilson_high"]) > float(row["fraction"])

    def test_vacuum_weak_skipped_without_vacuum_counts(self):
        src = SourceParams()
        c = expected_counts(src, simulate_rates(src, ChannelParams(50)), 1e11)
        rows = rows_of(batch.rate_from_counts(RunConfig(), c))
        assert [r["method"] for r in rows] == ["one-decoy", "improved"]


class TestCli:
    def write(self, tmp_path, text):
        p = tmp_path / "run.cfg"
        p.write_text(text)
        return str(p)

    def test_scan_to_file(self, tmp_path):
        cfg = self.write(tmp_path, "distance_stop = 100\ndistance_step = 50\n")
        out = tmp_path / "scan.csv"
        assert cli.run(["scan", "--config", cfg, "--out", str(out)]) == 0
        assert len(rows_of(out.read_text())) == 3

    def test_stdout(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "methods = improved\nN = 1e11\n")
        assert cli.run(["max-distance", "--config", cfg]) == 0
        assert capsys.readouterr().out.startswith("N,")

    def test_mode_flag_changes_output(self, tmp_path):
        cfg = self.write(tmp_path, "methods = improved\ndistance_stop = 100\ndistance_step = 100\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.run(["scan", "--config", cfg, "--out", str(a)]) == 0
        assert cli.run(["scan", "--config", cfg, "--out", str(b), "--mode", "published"]) == 0
        assert a.read_text() != b.read_text()

    def test_validate_seed_flag(self, tmp_path):
        cfg = self.write(tmp_path, "trials = 1000\nvalidate_epsilon = 0.2\n")
        outs = []
        for seed in ("1", "1", "2"):
            out = tmp_path / f"v{len(outs)}.csv"
            assert cli.run(["validate", "--config", cfg, "--seed", seed, "--out", str(out)]) == 0
            outs.append(out.read_text())
        assert outs[0] == outs[1] != outs[2]

    def test_rate_from_counts(self, tmp_path, capsys):
        src = SourceParams.with_vacuum()
        ch = ChannelParams(100)
        path = tmp_path / "counts.csv"
        write_counts(expected_counts(src, simulate_rates(src, ch), 1e11, ch.Y0), str(path))
        assert cli.run(["rate-from-counts", "--counts", str(path)]) == 0
        rows = rows_of(capsys.readouterr().out)
        assert [r["method"] for r in rows] == ["one-decoy", "vacuum-weak", "improved"]

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "distance_step = -1\n")
        assert cli.run(["scan", "--config", cfg]) == cli.EXIT_CONFIG
        assert "distance_step" in capsys.readouterr().err

    def test_missing_config_exit(self, tmp_path):
        assert cli.run(["scan", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_IO

    def test_unwritable_output_exit(self, tmp_path):
        cfg = self.write(tmp_path, "methods =\n")
        out = tmp_path / "missing_dir" / "x.csv"
        assert cli.run(["scan", "--config", cfg, "--out", str(out)]) == cli.EXIT_IO

    def test_bad_counts_exit(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("N,N_mu,N_nu,n_mu,n_nu,m_mu,m_nu\n10,6,4,2,1,3,0\n")
        assert cli.run(["rate-from-counts", "--counts", str(path)]) == cli.EXIT_CONFIG

    def test_numeric_error_exit(self, tmp_path):
        cfg = self.write(tmp_path, "N =\n")
        assert cli.run(["max-distance", "--config", cfg]) == cli.EXIT_NUMERIC

    def test_out_flag_overrides_config(self, tmp_path):
        out = tmp_path / "o.csv"
        cfg = self.write(tmp_path, f"methods =\nout = {tmp_path / 'cfg.csv'}\n")
        assert cli.run(["scan", "--config", cfg, "--out", str(out)]) == 0
        assert out.exists() and not (tmp_path / "cfg.csv").exists()


def test_config_defaults_match_simulation_defaults():
    cfg = RunConfig()
    assert cfg.source() == SourceParams()
    assert dataclasses.astuple(cfg.channel(0.0)) == dataclasses.astuple(ChannelParams())
