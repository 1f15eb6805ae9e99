"""Config document validation, table emission, argument handling, and the
end-to-end command entry point."""

from __future__ import annotations

import csv
import json

import pytest

from stratasim.cli import (
    build_run_spec,
    emit_table,
    main,
    parse_config,
    scenario_to_doc,
)
from stratasim.analytic import reported_strata_mixture
from stratasim.errors import ConfigParseError
from stratasim.harness import DEFAULT_SEED

DEFAULT_DOC = {
    "design": {"n": 80, "block_size": 10, "allocation": [1, 2, 2],
               "strata_probs": [0.4, 0.6]},
    "outcome": {"rho": 1.0, "delta": 0.5},
    "misclass": {"kind": "ignorable", "gamma_low": 0.02, "gamma_high": 0.02},
    "run": {"reps": 50_000, "rb_draws": 0, "seed": DEFAULT_SEED},
}

CUSTOM_DOC = {
    "design": {"n": 40, "block_size": 4, "allocation": [1, 1],
               "strata_probs": [0.3, 0.7]},
    "outcome": {"rho": 0.5, "delta": 0.0},
    "misclass": {"kind": "nonignorable2", "gamma_low": 0.1, "gamma_high": 0.2},
    "run": {"reps": 250, "rb_draws": 20, "seed": 99},
}


class TestParseConfig:
    def test_empty_document_takes_defaults(self):
        (config,) = parse_config({})
        assert config.design.n_patients == 80
        assert config.design.block_size == 10
        assert config.design.allocation.weights == (1, 2, 2)
        assert config.design.strata_probs == (0.4, 0.6)
        assert config.outcome.rho == 1.0
        assert config.outcome.delta == 0.5
        assert config.misclass.kind == "ignorable"
        assert config.n_replications == 50_000
        assert config.rb_draws == 0
        assert config.seed == DEFAULT_SEED
        assert config.label == "custom"

    def test_overrides_apply(self):
        (config,) = parse_config(CUSTOM_DOC)
        assert config.design.n_patients == 40
        assert config.design.allocation.weights == (1, 1)
        assert config.outcome.delta == 0.0
        assert config.misclass.kind == "nonignorable2"
        assert config.n_replications == 250
        assert config.rb_draws == 20
        assert config.seed == 99

    def test_accepts_string_and_path(self, tmp_path):
        from_dict = parse_config(CUSTOM_DOC)[0]
        assert parse_config(json.dumps(CUSTOM_DOC))[0] == from_dict
        path = tmp_path / "run.json"
        path.write_text(json.dumps(CUSTOM_DOC))
        assert parse_config(path)[0] == from_dict
        assert parse_config(str(path))[0] == from_dict

    @pytest.mark.parametrize(
        "doc,needle",
        [
            ({"design": {"m": 3}}, "design.m"),
            ({"desing": {}}, "desing"),
            ({"run": {"reps": "many"}}, "run.reps"),
            ({"run": {"reps": 2.5}}, "run.reps"),
            ({"outcome": {"rho": True}}, "outcome.rho"),
            ({"design": 3}, "design"),
            ({"design": {"allocation": [2]}}, "design.allocation"),
            ({"design": {"strata_probs": [1.0]}}, "design.strata_probs"),
            ({"misclass": {"kind": 7}}, "misclass.kind"),
        ],
    )
    def test_bad_fields_name_their_path(self, doc, needle):
        with pytest.raises(ConfigParseError, match=needle.replace(".", r"\.")):
            parse_config(doc)

    @pytest.mark.parametrize(
        "doc,needle",
        [
            ({"run": {"reps": 0}}, "reps"),
            ({"run": {"rb_draws": -1}}, "rb_draws"),
            ({"design": {"block_size": 7}}, "7"),
            ({"misclass": {"gamma_low": 1.5}}, "gamma"),
            ({"misclass": {"kind": "other"}}, "kind"),
            ({"outcome": {"rho": 1.5}}, "rho"),
        ],
    )
    def test_invalid_settings_surface_as_parse_errors(self, doc, needle):
        with pytest.raises(ConfigParseError, match=needle):
            parse_config(doc)

    def test_malformed_json_rejected(self):
        with pytest.raises(ConfigParseError, match="JSON"):
            parse_config("{not json")
        with pytest.raises(ConfigParseError, match="object"):
            parse_config("[1, 2]")

    def test_roundtrip_through_doc(self):
        config = parse_config(CUSTOM_DOC)[0]
        assert scenario_to_doc(config) == CUSTOM_DOC
        assert parse_config(scenario_to_doc(config))[0] == config
        assert scenario_to_doc(parse_config({})[0]) == DEFAULT_DOC


class TestEmitTable:
    ROWS = [
        {"label": "a", "value": 1.25, "note": None},
        {"label": "b", "value": -0.5, "note": "x"},
    ]
    META = {"tool": "stratasim", "seed": 7}

    def test_output_is_deterministic(self):
        first = emit_table(self.ROWS, self.META, "csv")
        assert first == emit_table(self.ROWS, self.META, "csv")
        assert emit_table(self.ROWS, self.META, "json") == emit_table(
            self.ROWS, self.META, "json"
        )

    def test_csv_meta_block_parses_back(self):
        text = emit_table(self.ROWS, self.META, "csv")
        meta_lines = [ln[2:] for ln in text.splitlines() if ln.startswith("# ")]
        assert json.loads("\n".join(meta_lines)) == self.META
        body = [ln for ln in text.splitlines() if not ln.startswith("# ")]
        parsed = list(csv.DictReader(body))
        assert [row["label"] for row in parsed] == ["a", "b"]
        assert float(parsed[0]["value"]) == 1.25

    def test_json_document_shape(self):
        doc = json.loads(emit_table(self.ROWS, self.META, "json"))
        assert doc["meta"] == self.META
        assert doc["rows"][1]["value"] == -0.5

    def test_empty_rows_keep_meta(self):
        text = emit_table([], self.META, "csv")
        assert text.startswith("# {")
        assert "label" not in text

    def test_unknown_format_rejected(self):
        with pytest.raises(ConfigParseError, match="format"):
            emit_table(self.ROWS, self.META, "yaml")


class TestBuildRunSpec:
    def test_suite_defaults_run_at_desk_scale(self):
        spec = build_run_spec(["--suite", "table1"])
        assert spec.suite == "table1"
        assert len(spec.scenarios) == 12
        assert spec.mixtures == []
        assert all(c.n_replications == 50_000 for c in spec.scenarios)
        spec2 = build_run_spec(["--suite", "table2"])
        assert len(spec2.scenarios) == 24
        assert all(c.n_replications == 4000 for c in spec2.scenarios)
        assert all(c.rb_draws == 1000 for c in spec2.scenarios)

    def test_paper_scale_restores_published_counts(self):
        spec = build_run_spec(["--suite", "table1", "--paper-scale"])
        assert all(c.n_replications == 400_000 for c in spec.scenarios)

    def test_explicit_overrides(self):
        spec = build_run_spec(
            ["--suite", "table2", "--reps", "123", "--rb-draws", "45", "--seed", "6"]
        )
        assert all(c.n_replications == 123 for c in spec.scenarios)
        assert all(c.rb_draws == 45 for c in spec.scenarios)
        assert all(c.seed == 6 for c in spec.scenarios)
        assert spec.seed == 6

    def test_mixture_suite(self):
        spec = build_run_spec(["--suite", "table3", "--format", "json"])
        assert len(spec.mixtures) == 6
        assert spec.scenarios == []
        assert spec.fmt == "json"

    def test_config_mode(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(CUSTOM_DOC))
        spec = build_run_spec(["--config", str(path), "--reps", "40", "--seed", "5"])
        assert spec.suite == "custom"
        assert spec.scenarios[0].n_replications == 40
        assert spec.scenarios[0].seed == 5
        assert spec.seed == 5

    def test_threads_floor_is_one(self):
        assert build_run_spec(["--suite", "table3", "--threads", "0"]).threads == 1

    def test_exactly_one_input_mode(self, tmp_path):
        with pytest.raises(SystemExit):
            build_run_spec([])
        path = tmp_path / "run.json"
        path.write_text("{}")
        with pytest.raises(SystemExit):
            build_run_spec(["--suite", "table1", "--config", str(path)])


class TestMain:
    def _write_config(self, tmp_path, reps=400, **overrides):
        doc = {"run": {"reps": reps, "rb_draws": 0, "seed": 11}, **overrides}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return path

    def test_custom_run_writes_parseable_json(self, tmp_path):
        cfg = self._write_config(tmp_path)
        out = tmp_path / "res.json"
        code = main(["--config", str(cfg), "--format", "json", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["meta"]["suite"] == "custom"
        assert doc["meta"]["seed"] == 11
        echoed = parse_config(doc["meta"]["scenarios"][0])[0]
        assert echoed == parse_config(str(cfg))[0]
        assert [row["strata"] for row in doc["rows"]] == ["corrected", "reported"]
        row = doc["rows"][0]
        assert abs(row["bias"]) < 0.1
        assert 0.8 < row["coverage"] <= 1.0
        assert row["level"] is None and row["power"] is not None
        assert row["rb_power"] is None  # rb_draws = 0 in the config

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = self._write_config(tmp_path, reps=150)
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["--config", str(cfg), "--out", str(first)]) == 0
        assert main(["--config", str(cfg), "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_mixture_suite_prints_analytic_cells(self, capsys):
        assert main(["--suite", "table3"]) == 0
        text = capsys.readouterr().out
        body = [ln for ln in text.splitlines() if not ln.startswith("# ")]
        rows = list(csv.DictReader(body))
        assert len(rows) == 24  # 6 cases x 2 strata x 2 arms
        by_key = {
            (r["label"], r["reported_stratum"], r["arm"]): r for r in rows
        }
        picked = by_key[("ignorable rho1", "0", "0")]
        summary = reported_strata_mixture(
            parse_config({"misclass": {"gamma_low": 0.15, "gamma_high": 0.30}})[0].misclass,
            parse_config({})[0].outcome,
        )
        cell = summary.cell(0, 0)
        assert float(picked["mean"]) == pytest.approx(cell.mean, abs=1e-12)
        assert float(picked["sd"]) == pytest.approx(cell.sd, abs=1e-12)
        assert float(picked["mean_rounded"]) == round(cell.mean, 2)
        assert float(by_key[("nonignorable1 rho1", "1", "1")]["mean_rounded"]) == 2.0

    def test_bad_config_exits_cleanly(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"design": {"blocks": 9}}')
        assert main(["--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "design.blocks" in err and "Traceback" not in err

    def test_strict_mode_fails_on_warnings(self, tmp_path, capsys):
        doc = {
            "design": {"n": 4, "block_size": 3, "allocation": [1, 1, 1]},
            "run": {"reps": 60, "rb_draws": 0, "seed": 7},
        }
        path = tmp_path / "frail.json"
        path.write_text(json.dumps(doc))
        assert main(["--config", str(path), "--out", str(tmp_path / "x.csv")]) == 0
        code = main(["--config", str(path), "--strict", "--out", str(tmp_path / "y.csv")])
        assert code == 1
        assert "warning" in capsys.readouterr().err
