import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbgsim import ConfigError, RunConfig, parse_config, run_scenario
from pbgsim.cli import config_lines, main
from pbgsim.spectral import BandModel, CouplingModel, effective_coupling

FAST_CONTOUR = """
window = 200
grid_points = 200001
"""


def parse_lines(*lines):
    return parse_config("\n".join(lines))


class TestParseConfig:
    def test_minimal_fig2_file(self):
        cfg = parse_lines("gamma = 1", "V_ab = 1", "C_pow23 = 1/3",
                          "omega_e_minus_omega_b = 0", "detuning = 0")
        assert cfg.scenario == "nojump"
        assert cfg.coupling_c == pytest.approx(3.0**-1.5)
        assert cfg.gamma == 1.0 and cfg.v_ab == 1.0

    def test_empty_file_gives_documented_defaults(self):
        cfg = parse_config("")
        assert cfg == RunConfig()
        assert cfg.scenario == "nojump"

    def test_sections_and_comments_are_tolerated(self):
        cfg = parse_lines("[contour]  # section headers are ignored",
                          "window = 250  # trailing comment", "",
                          "# full-line comment", "grid_points = 4001")
        assert cfg.window == 250.0 and cfg.grid_points == 4001

    def test_negative_gamma_rejected_naming_the_invariant(self):
        with pytest.raises(ConfigError, match="gamma.*>= 0"):
            parse_lines("gamma = -1")

    def test_unknown_key_cites_line(self):
        with pytest.raises(ConfigError, match="line 2.*frobnicate"):
            parse_lines("gamma = 1", "frobnicate = 3")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_lines("gamma = 1", "gamma = 2")

    def test_type_mismatch_cites_key_and_line(self):
        with pytest.raises(ConfigError, match="line 1.*grid_points"):
            parse_lines("grid_points = many")

    def test_coupling_keys_are_exclusive(self):
        with pytest.raises(ConfigError, match="mutually exclusive"):
            parse_lines("C = 0.2", "C_pow23 = 1/3")

    def test_rational_literals(self):
        cfg = parse_lines("detuning = -3/4")
        assert cfg.detuning == -0.75

    def test_lists(self):
        cfg = parse_lines("V_list = 0.5, 1, 3", "gamma_prime_list = 0,1/2")
        assert cfg.v_list == (0.5, 1.0, 3.0)
        assert cfg.gamma_prime_list == (0.0, 0.5)

    def test_physical_units_block(self):
        band = BandModel(scatterer_radius=1.0, refractive_index=1.082,
                         light_speed=1.0)
        micro = CouplingModel(dipole_moment=0.05, vacuum_permittivity=1.0)
        expected = effective_coupling(micro, band) / 2.0**1.5
        cfg = parse_lines("physical_gamma = 2", "band_n = 1.082", "band_a = 1",
                          "band_c = 1", "dipole_d = 0.05", "epsilon_0 = 1")
        assert cfg.coupling_c == pytest.approx(expected, rel=1e-12)

    def test_partial_physical_block_rejected(self):
        with pytest.raises(ConfigError, match="incomplete physical-units"):
            parse_lines("band_n = 1.082")

    def test_header_round_trip_fig2(self):
        cfg = parse_lines("scenario = montecarlo", "C_pow23 = 1/3",
                          "N_traj = 77", "master_seed = 5", "V_list = 0.5,3",
                          "out = results.csv")
        again = parse_config("\n".join(config_lines(cfg)))
        assert again == cfg

    @settings(max_examples=40, deadline=None)
    @given(
        gamma=st.floats(min_value=0.1, max_value=8.0),
        v=st.floats(min_value=0.0, max_value=5.0),
        c23=st.floats(min_value=1e-3, max_value=3.0),
        seed=st.integers(min_value=0, max_value=2**63 - 1),
        scenario=st.sampled_from(("nojump", "scan", "branching")),
        fmt=st.sampled_from(("csv", "jsonl")),
    )
    def test_header_round_trip_property(self, gamma, v, c23, seed, scenario, fmt):
        cfg = dataclasses.replace(RunConfig(), gamma=gamma, v_ab=v,
                                  coupling_c=c23**1.5, master_seed=seed,
                                  scenario=scenario, fmt=fmt)
        assert parse_config("\n".join(config_lines(cfg))) == cfg


class TestScenarios:
    def test_nojump_final_norm_near_published_value(self):
        cfg = parse_config("scenario = nojump\ndt = 0.01\n" + FAST_CONTOUR)
        artifacts = run_scenario(cfg)
        text = artifacts[None]
        last = text.strip().splitlines()[-1].split(",")
        assert float(last[-1]) == pytest.approx(0.2, abs=0.05)
        header = [l for l in text.splitlines() if l.startswith("#")]
        assert any("config-begin" in l for l in header)

    def test_emitted_header_reparses_identically(self):
        cfg = parse_config("scenario = nojump\nT = 5\ndt = 0.05\n" + FAST_CONTOUR)
        text = run_scenario(cfg)[None]
        lines = text.splitlines()
        inside = lines[lines.index("# config-begin") + 1: lines.index("# config-end")]
        again = parse_config("\n".join(l[2:] for l in inside))
        assert again == cfg

    def test_oracle_scenario_two_level_limit(self):
        cfg = parse_config(
            "scenario = oracle\nC = 0\nT = 10\ndt = 0.01\nmodes = 64\n"
            "window = 400\ngrid_points = 800001\n")
        text = run_scenario(cfg)[None]
        summary = json.loads(next(l for l in text.splitlines()
                                  if l.startswith("# summary")).split("=", 1)[1])
        assert summary["sup_norm_diff"] < 1e-8

    def test_scan_emits_one_file_per_drive(self, tmp_path):
        out = tmp_path / "scan.csv"
        cfg = parse_config(
            f"scenario = scan\nC_pow23 = 1\ndelta_points = 7\nV_list = 0.5,3\n"
            f"out = {out}\n")
        artifacts = run_scenario(cfg)
        assert set(artifacts) == {str(tmp_path / "scan_V0.5.csv"),
                                  str(tmp_path / "scan_V3.0.csv")}
        for text in artifacts.values():
            assert text.splitlines()[-7].startswith("delta") or "delta" in text

    def test_branching_table(self):
        cfg = parse_config(
            "scenario = branching\ngamma_prime_list = 0,1\nV_list = 1\n"
            "T = 30\ndt = 0.01\n" + FAST_CONTOUR)
        text = run_scenario(cfg)[None]
        rows = [l for l in text.splitlines() if not l.startswith("#")][1:]
        assert len(rows) == 2
        table = {float(r.split(",")[0]): float(r.split(",")[2]) for r in rows}
        assert table[0.0] == pytest.approx(0.0, abs=1e-3)
        assert table[1.0] == pytest.approx(0.5, abs=1e-3)

    def test_montecarlo_bytes_are_deterministic(self):
        src = ("scenario = montecarlo\nN_traj = 150\nT = 15\ndt = 0.01\n"
               "master_seed = 99\n" + FAST_CONTOUR)
        a = run_scenario(parse_config(src))[None]
        b = run_scenario(parse_config(src))[None]
        assert a.encode() == b.encode()

    def test_jsonl_rows_parse(self):
        cfg = parse_config("scenario = nojump\nT = 2\ndt = 0.02\nformat = jsonl\n"
                           + FAST_CONTOUR)
        text = run_scenario(cfg)[None]
        lines = text.strip().splitlines()
        head = json.loads(lines[0])
        assert head["config"]["scenario"] == "nojump"
        row = json.loads(lines[-1])["row"]
        assert set(row) == {"t", "pi0_a", "pi0_b", "pi0_c", "P"}


class TestMain:
    def test_exit_zero_and_writes_file(self, tmp_path):
        out = tmp_path / "run.csv"
        cfg_file = tmp_path / "cfg.txt"
        cfg_file.write_text("T = 2\ndt = 0.02\n" + FAST_CONTOUR)
        status = main(["nojump", "--config", str(cfg_file), "--out", str(out)])
        assert status == 0
        assert out.exists() and out.read_text().startswith("# pbgsim nojump")

    def test_exit_two_on_config_error(self, tmp_path, capsys):
        cfg_file = tmp_path / "bad.txt"
        cfg_file.write_text("gamma = -1\n")
        assert main(["nojump", "--config", str(cfg_file)]) == 2
        assert "gamma" in capsys.readouterr().err

    def test_exit_two_on_missing_file(self):
        assert main(["nojump", "--config", "/nonexistent/x.cfg"]) == 2

    def test_exit_three_on_accuracy_error(self, tmp_path, capsys):
        # a 3 gamma-unit window cannot resolve the transform: invariants break
        cfg_file = tmp_path / "tiny.txt"
        cfg_file.write_text("T = 5\ndt = 0.05\nwindow = 3\ngrid_points = 2001\n"
                            "edge_halfwidth = 0.1\n")
        assert main(["nojump", "--config", str(cfg_file)]) == 3
        assert "accuracy" in capsys.readouterr().err

    def test_seed_override_changes_output(self, tmp_path):
        cfg_file = tmp_path / "mc.txt"
        cfg_file.write_text("N_traj = 40\nT = 10\ndt = 0.05\n" + FAST_CONTOUR)
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"mc{seed}.csv"
            assert main(["montecarlo", "--config", str(cfg_file),
                         "--seed", seed, "--out", str(out)]) == 0
            outs.append(out.read_text())
        assert outs[0] != outs[1]
        assert f"master_seed = 1" in outs[0]

    def test_stdout_when_no_out(self, capsys):
        assert main(["nojump"]) != 1  # runs with defaults; no crash
        captured = capsys.readouterr().out
        assert captured.startswith("# pbgsim nojump")
