"""Command surface: outputs, exit codes, and report determinism."""

import json

import numpy as np
import pytest

from gmech import BSMarketParams, synth_chain
from gmech.cli import main

from util import BS_CALL_ATM


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestPrice:
    def test_zero_generator_prices_walk_to_zero(self, capsys):
        code, out = run_cli(capsys, "price", "--gen", "zero",
                            "--payoff", "bm", "--steps", "4")
        assert code == 0
        assert json.loads(out)["y0"] == 0.0

    def test_hedge_only_closed_form(self, capsys):
        code, out = run_cli(capsys, "price", "--gen", "abs_z:0.1",
                            "--payoff", "linbm:2", "--t0", "0", "--T", "1",
                            "--steps", "32")
        assert code == 0
        assert json.loads(out)["y0"] == pytest.approx(0.2, abs=1e-12)

    def test_black_scholes_call(self, capsys):
        code, out = run_cli(capsys, "price",
                            "--gen", "bs:r=0.05,b=0.08,sigma=0.2",
                            "--payoff", "call:100", "--s0", "100",
                            "--T", "1", "--steps", "2000")
        assert code == 0
        assert json.loads(out)["y0"] == pytest.approx(BS_CALL_ATM, abs=0.05)

    def test_unknown_generator_is_usage_error(self, capsys):
        code, _ = run_cli(capsys, "price", "--gen", "nope",
                          "--payoff", "bm", "--steps", "4")
        assert code == 2

    def test_call_payoff_needs_spot(self, capsys):
        code, _ = run_cli(capsys, "price", "--gen", "zero",
                          "--payoff", "call:100", "--steps", "4")
        assert code == 2

    def test_solver_failure_exit_code(self, capsys):
        # mu * dt >= 1 on a 2-step unit grid
        code, _ = run_cli(capsys, "price", "--gen", "gmu:2.5",
                          "--payoff", "bm", "--steps", "2")
        assert code == 1


class TestAxioms:
    def test_clean_mechanism_exits_zero(self, capsys):
        code, out = run_cli(capsys, "axioms", "--gen", "gmu:0.5",
                            "--samples", "200", "--seed", "7", "--steps", "8")
        assert code == 0
        report = json.loads(out)
        assert report["all_passed"] is True
        assert set(report["laws"]) == {
            "monotonicity", "identity", "time_consistency", "locality",
            "splitting", "zero_preservation", "locality_with_zero"}

    def test_non_monotone_scheme_exits_one(self, capsys):
        code, out = run_cli(capsys, "axioms", "--gen", "abs_z:3.0",
                            "--samples", "60", "--seed", "1", "--steps", "4")
        assert code == 1
        assert json.loads(out)["laws"]["monotonicity"]["passed"] is False

    def test_reports_are_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            assert main(["axioms", "--gen", "gmu:0.4", "--samples", "20",
                         "--seed", "3", "--steps", "8",
                         "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]


class TestDecomposeProbeRecover:
    def test_decompose_round_trip(self, capsys):
        code, out = run_cli(capsys, "decompose", "--gen", "gmu:0.3",
                            "--payoff", "bm", "--steps", "16",
                            "--div-rate", "0.1")
        assert code == 0
        report = json.loads(out)
        assert report["passed"] and report["increasing"]

    def test_probe_values(self, capsys):
        code, out = run_cli(capsys, "probe", "--gen", "abs_z:0.3",
                            "--zbar", "1,2", "--steps", "32")
        assert code == 0
        probes = json.loads(out)["probes"]
        assert probes["1"] == pytest.approx(0.3, abs=1e-12)
        assert probes["2"] == pytest.approx(0.6, abs=1e-12)

    def test_recover_json(self, capsys):
        # leading-dash grid values must use the --opt=value form
        code, out = run_cli(capsys, "recover", "--gen-hidden", "abs_z:0.3",
                            "--level", "5", "--y-grid", "0,1",
                            "--z-grid=-1,0,1")
        assert code == 0
        report = json.loads(out)
        assert report["certificate_ok"] is True
        by_point = {(r["y"], r["z"]): r["g"] for r in report["rows"]
                    if r["t"] == 0.0}
        assert by_point[(1.0, 1.0)] == pytest.approx(0.3, abs=1e-9)
        assert by_point[(0.0, 0.0)] == pytest.approx(0.0, abs=1e-12)

    def test_recover_csv_header(self, capsys):
        code, out = run_cli(capsys, "recover", "--gen-hidden", "zero",
                            "--level", "3", "--y-grid", "0", "--z-grid", "1",
                            "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "t,y,z,g"

    def test_recover_points_file(self, capsys, tmp_path):
        points = tmp_path / "grid.json"
        points.write_text(json.dumps([[1.0, 1.0], [0.0, 0.0]]))
        code, out = run_cli(capsys, "recover", "--gen-hidden", "abs_z:0.3",
                            "--level", "4", "--points", str(points))
        assert code == 0
        rows = json.loads(out)["rows"]
        assert any(r["y"] == 1.0 and abs(r["g"] - 0.3) < 1e-9 for r in rows)


class TestAuditAndSynth:
    @pytest.fixture
    def chain_csv(self, tmp_path):
        params = BSMarketParams(r=0.05, b=0.08, sigma=0.2)
        chain = synth_chain(params, 100.0, np.linspace(90, 110, 6), 0.0, 0.25)
        path = tmp_path / "chain.csv"
        chain.to_csv(str(path))
        return str(path)

    def test_clean_audit_exits_zero(self, capsys, chain_csv):
        code, out = run_cli(capsys, "audit", "--chain", chain_csv,
                            "--mu", "0.5", "--steps", "64", "--vol", "0.2")
        assert code == 0
        report = json.loads(out)
        assert report["total_violated"] == 0
        assert report["total_tested"] == 4 * 6 * 5

    def test_missing_file_is_data_error(self, capsys):
        code, _ = run_cli(capsys, "audit", "--chain", "/nonexistent.csv",
                          "--mu", "0.5")
        assert code == 3

    def test_malformed_file_is_data_error(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not,a,chain\n1,2,3\n")
        code, _ = run_cli(capsys, "audit", "--chain", str(path), "--mu", "0.5")
        assert code == 3

    def test_corrupted_chain_exits_one(self, capsys, tmp_path):
        params = BSMarketParams(r=0.05, b=0.08, sigma=0.2)
        chain = synth_chain(params, 100.0, np.linspace(90, 110, 6), 0.0, 0.25)
        chain.put_mids[2] = chain.put_mids[3] + 1.0
        path = tmp_path / "bad_chain.csv"
        chain.to_csv(str(path))
        code, out = run_cli(capsys, "audit", "--chain", str(path),
                            "--mu", "0.5", "--steps", "32", "--vol", "0.2")
        assert code == 1
        assert json.loads(out)["anomalies"]

    def test_synth_then_audit_csv_format(self, capsys, tmp_path):
        path = tmp_path / "chain.csv"
        assert main(["synth", "--n-strikes", "5", "--lo", "95", "--hi", "105",
                     "--expiry-days", "60", "--out", str(path)]) == 0
        capsys.readouterr()
        code, out = run_cli(capsys, "audit", "--chain", str(path),
                            "--mu", "0.5", "--steps", "32", "--vol", "0.2",
                            "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "family,tested,passed,violated"
