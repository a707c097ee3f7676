import json
from pathlib import Path

import pytest

from localdml.cli import REPORT_ORDER, coverage_basename, main, table_title
from localdml.config import ConfigError, EstimateConfig, parse_config, validate_config
from localdml.simlab import CoverageCell, dgp_sample, read_table_csv, table_csv


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture
def dgp_csv(tmp_path):
    path = tmp_path / "dgp.csv"
    dgp_sample(100, 17).to_csv(path)
    return path


def _estimate_doc(data, out, **extra):
    doc = {"data": str(data), "columns": {"y": "y", "d": "d", "v": "v", "x": ["x1", "x2", "x3"]},
           "functional": {"kind": "cate", "point": 0.0, "c_h": 0.5}, "output_dir": str(out)}
    doc.update(extra)
    return doc


# ---- config ------------------------------------------------------------------------------


def test_minimal_config_fills_defaults(tmp_path, dgp_csv):
    cfg = parse_config(_write_json(tmp_path / "c.json", _estimate_doc(dgp_csv, tmp_path)), "estimate")
    assert isinstance(cfg, EstimateConfig)
    assert cfg.n_folds == 5 and cfg.level == 0.05 and cfg.seed == 0
    assert cfg.learner.kind == "lasso" and cfg.riesz.strategy == "localize"
    assert cfg.functional.kernel_kind == "epanechnikov"


def test_unknown_key_is_named(tmp_path, dgp_csv):
    doc = _estimate_doc(dgp_csv, tmp_path)
    doc["functional"]["bandwith"] = 0.1
    with pytest.raises(ConfigError, match="bandwith"):
        parse_config(_write_json(tmp_path / "c.json", doc), "estimate")


def test_wrong_type_names_key(tmp_path, dgp_csv):
    doc = _estimate_doc(dgp_csv, tmp_path, n_folds="five")
    with pytest.raises(ConfigError, match="n_folds"):
        parse_config(_write_json(tmp_path / "c.json", doc), "estimate")


def test_overrides_apply_dotted_paths(tmp_path, dgp_csv):
    path = _write_json(tmp_path / "c.json", _estimate_doc(dgp_csv, tmp_path))
    cfg = parse_config(path, "estimate", ["functional.point=0.25", "seed=9"])
    assert cfg.functional.point == 0.25 and cfg.seed == 9


def test_manifest_config_reparses_to_same_config(tmp_path, dgp_csv):
    out = tmp_path / "out"
    path = _write_json(tmp_path / "c.json", _estimate_doc(dgp_csv, out))
    assert main(["estimate", str(path)]) in (0, 1)
    manifest = json.loads((out / "manifest.json").read_text())
    assert validate_config(manifest["config"], "estimate") == parse_config(path, "estimate")


# ---- estimate ------------------------------------------------------------------------------


def test_estimate_artifacts(tmp_path, dgp_csv, capsys):
    out = tmp_path / "out"
    code = main(["estimate", str(_write_json(tmp_path / "c.json", _estimate_doc(dgp_csv, out)))])
    assert code in (0, 1)
    res = json.loads((out / "result.json").read_text())
    assert res["theta"] - res["ci_lower"] == pytest.approx(res["ci_upper"] - res["theta"], rel=1e-12)
    assert res["config"]["functional"]["c_h"] == 0.5
    assert res["diagnostics"]["source"] == "plug-in"
    rows = (out / "result.csv").read_text().splitlines()
    assert rows[0].startswith("kind,point,n,theta") and len(rows) == 2
    printed = capsys.readouterr().out
    assert "theta =" in printed and "CI =" in printed and "berry_esseen" in printed


def test_estimate_is_deterministic(tmp_path, dgp_csv):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["estimate", str(_write_json(tmp_path / f"{name}.json", _estimate_doc(dgp_csv, out)))])
        doc = json.loads((out / "result.json").read_text())
        doc["config"].pop("output_dir")
        texts.append((json.dumps(doc, sort_keys=True), (out / "result.csv").read_text()))
        manifest = json.loads((out / "manifest.json").read_text())
        assert "timestamp" in manifest
    assert texts[0] == texts[1]


def test_malformed_csv_names_the_row(tmp_path, dgp_csv, capsys):
    lines = dgp_csv.read_text().splitlines()
    lines[5] = lines[5].split(",", 1)[0] + ",oops" + "," * (lines[5].count(",") - 1)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code = main(["estimate", str(_write_json(tmp_path / "c.json", _estimate_doc(bad, tmp_path / "o")))])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "IngestionError" and err["row"] == 6


def test_bad_config_exit_code(tmp_path, dgp_csv, capsys):
    doc = _estimate_doc(dgp_csv, tmp_path)
    doc["bogus"] = 1
    assert main(["estimate", str(_write_json(tmp_path / "c.json", doc))]) == 2
    assert "unknown key 'bogus'" in json.loads(capsys.readouterr().err)["message"]


# ---- simulate, bounds, report ------------------------------------------------------------------


def test_simulate_smoke(tmp_path):
    cfg = _write_json(tmp_path / "s.json", {"replications": 2, "output_dir": str(tmp_path)})
    assert main(["simulate", str(cfg)]) == 0
    md = (tmp_path / "coverage_low_lasso.md").read_text()
    assert "MC S.E. 95%" in md and md.count("\n| ") == 10
    cells = read_table_csv(tmp_path / "coverage_low_lasso.csv")
    assert len(cells) == 9 and all(c.replications == 2 for c in cells)
    manifest = json.loads((tmp_path / "coverage_low_lasso.manifest.json").read_text())
    assert manifest["config"]["replications"] == 2 and manifest["flagged_cells"] == []


def test_bounds_zero_rates(tmp_path):
    cfg = _write_json(tmp_path / "b.json", {"R_gamma": 0, "R_alpha": 0})
    assert main(["bounds", str(cfg), "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "bounds.json").read_text())
    assert rep["bounds"]["delta_basic"] == 0.0 and rep["bounds"]["delta_refined"] == 0.0
    assert rep["config"]["inputs"] == {"R_gamma": 0, "R_alpha": 0}


def test_bounds_sequence_writes_checklist(tmp_path):
    seq = [{"n": n, "R_gamma": n ** -0.6, "R_alpha": n ** -0.6} for n in (100, 1000, 10000)]
    cfg = _write_json(tmp_path / "b.json", {"inputs": seq, "output_dir": str(tmp_path)})
    assert main(["bounds", str(cfg)]) == 0
    rep = json.loads((tmp_path / "bounds.json").read_text())
    assert rep["checklist"]["flags"]["condition_3"]
    assert (tmp_path / "checklist.csv").read_text().startswith("# config:")


def test_bounds_rejects_bad_inputs(tmp_path, capsys):
    cfg = _write_json(tmp_path / "b.json", {"eps": 2.0})
    assert main(["bounds", str(cfg), "--output-dir", str(tmp_path)]) == 2


def _cell(point, c_h):
    return CoverageCell(point, 0.0, c_h, 10, 0, 0.0, 0.1, 0.8, 0.9)


def test_report_orders_six_tables(tmp_path, capsys):
    # write in reverse so directory order does not match the expected order
    for learner, regime in reversed(REPORT_ORDER):
        cells = [_cell(p, c) for p in (-0.25, 0.0, 0.25) for c in (0.25, 0.5, 1.0)]
        (tmp_path / f"{coverage_basename(learner, regime)}.csv").write_text(
            table_csv(cells, {"learner": learner, "regime": regime}))
    assert main(["report", str(tmp_path)]) == 0
    text = (tmp_path / "coverage_report.md").read_text()
    headings = [line[4:] for line in text.splitlines() if line.startswith("### ")]
    assert headings == [table_title(lr, rg) for lr, rg in REPORT_ORDER]
    assert headings[0] == "neural network, low dimensional"
    assert text.count("<!-- config:") == 6


def test_report_on_empty_directory_fails(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
