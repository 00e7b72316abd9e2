import csv
import json
import shutil
from pathlib import Path

import pytest

from effort_audit.cli import main, parse_seeds
from effort_audit.config import load_config, parse_config, with_overrides
from effort_audit.exceptions import ConfigError
from effort_audit.report import fmt

from conftest import CONFIGS, GERMAN_PATH

GERMAN_CFG = CONFIGS / "german.yaml"
SYNTH_CFG = CONFIGS / "synthetic.yaml"

MINIMAL = """\
experiment: synthetic
classifier:
  features: [x2, x3]
constraints:
  x1: immutable
  x2: actionable
"""


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_shipped_configs_parse(self):
        g = load_config(GERMAN_CFG)
        assert g.experiment == "german" and g.data_path.resolve() == GERMAN_PATH.resolve()
        s = load_config(SYNTH_CFG)
        assert s.alphas == [0, 1, 2, 3, 4, 6] and s.seeds == [0, 1, 2, 3, 4]

    def test_german_constraints_declared(self):
        g = load_config(GERMAN_CFG)
        assert g.actionability == {"sex": "immutable", "age": "actionable", "amount": "actionable",
                                   "duration": "mutable"}
        assert g.direction == {"age": "increase"}

    def test_unknown_key_has_line(self):
        with pytest.raises(ConfigError, match=r"line 7: colour: unknown key"):
            parse_config(MINIMAL + "colour: red\n")

    def test_bad_quantiles(self):
        with pytest.raises(ConfigError, match="line 7: quantiles"):
            parse_config(MINIMAL + "quantiles: [0.5, 0.2]\n")

    def test_quantile_zero(self):
        with pytest.raises(ConfigError, match="quantiles"):
            parse_config(MINIMAL + "quantiles: [0.0, 1.0]\n")

    def test_empty_alphas(self):
        with pytest.raises(ConfigError, match="alphas"):
            parse_config(MINIMAL + "alphas: []\n")

    def test_yaml_syntax_error_has_line(self):
        with pytest.raises(ConfigError, match=r"line 2, column 13"):
            parse_config("experiment: german\nnorm: {l1: [}\nseeds: [0]\n")

    def test_sensitive_not_actionable(self):
        cfg = parse_config(MINIMAL.replace("x1: immutable", "x1: actionable"))
        from effort_audit.data import generate_synthetic, synthetic_graph
        with pytest.raises(ConfigError, match="sensitive"):
            cfg.validate_against(generate_synthetic(50, 1.0, 0), synthetic_graph(1.0))

    def test_constraint_on_unknown_node(self):
        cfg = parse_config(MINIMAL + "  x9: actionable\n")
        from effort_audit.data import generate_synthetic, synthetic_graph
        with pytest.raises(ConfigError, match="x9"):
            cfg.validate_against(generate_synthetic(50, 1.0, 0), synthetic_graph(1.0))

    def test_overrides(self):
        cfg = with_overrides(parse_config(MINIMAL), seeds=[3, 4], quantiles=[0.5, 1.0], norm="l2")
        assert cfg.seeds == [3, 4] and cfg.quantiles == (0.5, 1.0) and cfg.norm == "l2"
        with pytest.raises(ConfigError):
            with_overrides(cfg, quantiles=[1.0, 0.5])

    def test_parse_seeds(self):
        assert parse_seeds("0..4") == [0, 1, 2, 3, 4]
        assert parse_seeds("2,7") == [2, 7]


class TestCli:
    def test_audit_german(self, tmp_path, capsys):
        assert main(["audit", "--config", str(GERMAN_CFG), "--out", str(tmp_path)]) == 0
        curves = rows(tmp_path / "curves.csv")
        assert len(curves) == 13 * 7 * 2
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["runs"][0]["n_rows"] == 1000
        # every csv number is the 9-significant-digit rendering of the report value
        by_key = {(p["center_group"], p["quantile"], p["metric"]): p for p in report["curves"]}
        for r in curves:
            p = by_key[(r["center_group"], float(r["quantile"]), r["metric"])]
            assert r["mean"] == fmt(p["mean"]) and r["ci_low"] == fmt(p["ci_low"])

    def test_audit_synthetic_grid(self, tmp_path):
        assert main(["audit", "--config", str(SYNTH_CFG), "--out", str(tmp_path), "--seeds", "0"]) == 0
        curves = rows(tmp_path / "curves.csv")
        for group in ("protected", "unprotected"):
            for metric in ("acr", "rd", "phi_pos", "phi_neg", "ratio_protected", "subset_size_pos", "subset_size_neg"):
                sel = [r for r in curves if r["center_group"] == group and r["metric"] == metric]
                assert len(sel) == 13

    def test_missing_german_data(self, tmp_path, capsys):
        code = main(["audit", "--config", str(GERMAN_CFG), "--out", str(tmp_path), "--data", str(tmp_path / "no")])
        assert code == 2
        assert "--data" in capsys.readouterr().err
        assert not (tmp_path / "curves.csv").exists()

    def test_config_without_data_path(self, tmp_path, capsys):
        cfg = tmp_path / "g.yaml"
        text = GERMAN_CFG.read_text().replace("  path: ../data/german.data\n", "")
        cfg.write_text(text)
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "--data" in capsys.readouterr().err

    def test_data_flag(self, tmp_path):
        cfg = tmp_path / "g.yaml"
        cfg.write_text(GERMAN_CFG.read_text().replace("../data/german.data", "nowhere.data"))
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o"), "--data", str(GERMAN_PATH),
                     "--quantiles", "0.2,1"]) == 0
        assert len(rows(tmp_path / "o" / "curves.csv")) == 2 * 7 * 2

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(MINIMAL + "norm: l7\n")
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "line 7" in capsys.readouterr().err

    def test_deterministic_repeat(self, tmp_path):
        for d in ("a", "b"):
            assert main(["audit", "--config", str(GERMAN_CFG), "--out", str(tmp_path / d)]) == 0
        assert (tmp_path / "a" / "curves.csv").read_bytes() == (tmp_path / "b" / "curves.csv").read_bytes()
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_sweep_alpha_zero(self, tmp_path):
        assert main(["sweep-alpha", "--config", str(SYNTH_CFG), "--out", str(tmp_path),
                     "--alpha", "0", "--seeds", "0", "--quantiles", "0.2,1"]) == 0
        out = {r["metric"]: r for r in rows(tmp_path / "sweep.csv")}
        assert float(out["cfr"]["mean"]) == 1.0
        assert abs(float(out["acr_system_protected"]["mean"]) - 1.0) < 0.15
        assert json.loads((tmp_path / "sweep.json").read_text())["rows"]

    def test_sweep_requires_synthetic(self, tmp_path):
        assert main(["sweep-alpha", "--config", str(GERMAN_CFG), "--out", str(tmp_path)]) == 2

    def test_cf_compare_german(self, tmp_path):
        assert main(["cf-compare", "--config", str(GERMAN_CFG), "--out", str(tmp_path)]) == 0
        result = json.loads((tmp_path / "cf_compare.json").read_text())
        assert 0 <= result["cfr"] <= 1
        groups = {r["group"] for r in rows(tmp_path / "cf_compare.csv")}
        assert groups == {"cf_fair", "cf_unfair"}

    def test_cf_compare_isolated_sensitive(self, tmp_path):
        assert main(["cf-compare", "--config", str(SYNTH_CFG), "--out", str(tmp_path),
                     "--alpha", "0", "--seeds", "0"]) == 0
        result = json.loads((tmp_path / "cf_compare.json").read_text())
        assert result["cfr"] == 1.0 and result["runs"][0]["boxes"]["cf_unfair"] is None

    def test_gen_data(self, tmp_path):
        assert main(["gen-data", "--config", str(SYNTH_CFG), "--out", str(tmp_path), "--alpha", "1", "--seeds", "0,1"]) == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == ["synthetic_alpha1_seed0.csv", "synthetic_alpha1_seed1.csv"]
        assert len(rows(tmp_path / "synthetic_alpha1_seed0.csv")) == 1000

    def test_figures(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert main(["audit", "--config", str(GERMAN_CFG), "--out", str(tmp_path), "--figures",
                     "--quantiles", "0.2,0.5,1"]) == 0
        for name in ("acr.png", "ratio_protected.png", "costs_protected.png", "costs_unprotected.png"):
            assert (tmp_path / name).stat().st_size > 0
