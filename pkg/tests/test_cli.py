import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from bayestrial.cli import main
from bayestrial.config import ConfigError, load_config, parse_config

CONFIGS = resources.files("bayestrial") / "configs"


def cfg_path(name: str) -> str:
    return str(CONFIGS / f"{name}.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2) if not isinstance(doc, str) else doc)
    return str(p)


SMALL_OC = {
    "design": {"variant": "SINGLE_BINARY", "n": 150, "hypothesis": {"theta0": 0.12, "direction": "LESS"}},
    "scenarios": [0.12, 0.05],
    "settings": {"replications": 2000},
}


def test_bundled_configs_parse():
    names = sorted(p.name for p in CONFIGS.iterdir() if p.name.endswith(".json"))
    assert len(names) >= 10
    for name in names:
        load_config(str(CONFIGS / name))


def test_pvalue_worked_example(capsys):
    code, out, _ = run(capsys, "multiplicity", "--config", cfg_path("multiplicity_pvalues"))
    assert code == 0
    rows = {r["method"]: r["rejected"] for r in csv.DictReader(io.StringIO(out))}
    assert rows == {"BONFERRONI": "{1}", "HOLM": "{1,3}", "HOCHBERG": "{1,3}"}


def test_csv_shape(capsys, tmp_path):
    code, out, _ = run(capsys, "oc", "--config", write(tmp_path, SMALL_OC))
    assert code == 0
    assert out.count("\r\n") == 3
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["master_seed"] == "20240521" and rows[0]["replications"] == "2000"
    assert len(rows[0]["reject_rate"].split(".")[1]) == 4


def test_json_output(capsys, tmp_path):
    code, out, _ = run(capsys, "oc", "--config", write(tmp_path, SMALL_OC), "--format", "json", "--exact")
    rows = json.loads(out)
    assert code == 0 and rows[0]["exact"] == pytest.approx(0.0234, abs=1e-4)


def test_byte_identical_reruns(capsys, tmp_path):
    path = write(tmp_path, SMALL_OC)
    a = run(capsys, "oc", "--config", path, "--seed", "99")[1]
    b = run(capsys, "oc", "--config", path, "--seed", "99")[1]
    c = run(capsys, "oc", "--config", path, "--seed", "99", "--threads", "2")[1]
    assert a == b == c


def test_seed_precedence(capsys, tmp_path, monkeypatch):
    path = write(tmp_path, SMALL_OC)
    monkeypatch.setenv("BAYESTRIAL_SEED", "7")
    env = list(csv.DictReader(io.StringIO(run(capsys, "oc", "--config", path)[1])))
    assert env[0]["master_seed"] == "7"
    flag = list(csv.DictReader(io.StringIO(run(capsys, "oc", "--config", path, "--seed", "8")[1])))
    assert flag[0]["master_seed"] == "8"


def test_output_file(capsys, tmp_path):
    dest = tmp_path / "out.csv"
    code, out, _ = run(capsys, "oc", "--config", write(tmp_path, SMALL_OC), "--output", str(dest))
    assert code == 0 and out == "" and dest.read_bytes().startswith(b"design,")


def test_search_found(capsys):
    code, out, err = run(capsys, "search-n", "--config", cfg_path("search_n_noninformative"))
    assert code == 0 and "selected N=150" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["selected"] for r in rows] == ["false", "true"]


def test_search_not_found(capsys):
    code, _, err = run(capsys, "search-n", "--config", cfg_path("search_n_optimistic"))
    assert code == 3 and err.startswith("NOT_FOUND")


def test_prior_claim(capsys):
    code, out, _ = run(capsys, "prior-claim", "--config", cfg_path("table2_prior_claim"), "--exact")
    probs = [float(r["probability"]) for r in csv.DictReader(io.StringIO(out))]
    assert code == 0 and probs == sorted(probs) and len(probs) == 4


def test_borrow_sweep_exact(capsys):
    code, out, _ = run(capsys, "borrow-sweep", "--config", cfg_path("fig9a_borrow_optimistic"), "--exact")
    rows = list(csv.DictReader(io.StringIO(out)))
    first = {r["scenario"]: float(r["exact"]) for r in rows if float(r["a0"]) == 0.0}
    assert code == 0
    assert first["NULL_BOUNDARY"] == pytest.approx(0.0225, abs=0.003)
    assert first["ALTERNATIVE"] == pytest.approx(0.8681, abs=0.003)


def test_power_curve(capsys, tmp_path):
    doc = dict(SMALL_OC, grid=[0.05, 0.08, 0.12])
    code, out, _ = run(capsys, "power-curve", "--config", write(tmp_path, doc))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["theta"] for r in rows] == ["0.0500", "0.0800", "0.1200"]


class TestErrors:
    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "oc", "--config", "/nonexistent.json")
        assert code == 2 and "config error" in err

    def test_bad_replications_names_line(self, capsys, tmp_path):
        path = write(tmp_path, SMALL_OC)
        code, _, err = run(capsys, "oc", "--config", path, "--replications", "0")
        assert code == 2 and "settings" in err

    def test_bad_field_reports_line(self, capsys, tmp_path):
        doc = json.loads(json.dumps(SMALL_OC))
        doc["design"]["lam"] = 3
        code, _, err = run(capsys, "oc", "--config", write(tmp_path, doc))
        assert code == 2 and "line" in err and "design.lam" in err

    def test_unknown_key(self, tmp_path):
        doc = dict(SMALL_OC, replicas=5)
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, doc))
        assert "replicas" in info.value.describe()

    def test_malformed_json(self, capsys, tmp_path):
        code, _, err = run(capsys, "oc", "--config", write(tmp_path, '{"design": {\n  "n": }'))
        assert code == 2 and "line 2" in err

    def test_unknown_variant(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config({"design": {"variant": "CRM"}})

    def test_usage_error(self, capsys):
        assert run(capsys, "oc")[0] == 2

    def test_wrong_command_for_variant(self, capsys):
        code, _, _ = run(capsys, "borrow-sweep", "--config", cfg_path("table3_gsd"))
        assert code == 2

    def test_env_threads_must_be_int(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("BAYESTRIAL_THREADS", "many")
        assert run(capsys, "oc", "--config", write(tmp_path, SMALL_OC))[0] == 2


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "bayestrial.cli", "multiplicity", "--config", cfg_path("multiplicity_pvalues"), "--format", "json"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert [r["rejected"] for r in json.loads(proc.stdout)] == ["{1}", "{1,3}", "{1,3}"]
