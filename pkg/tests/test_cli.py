from __future__ import annotations

import json
import shutil
import subprocess
import sys

import httpx
import pytest
from click.testing import CliRunner

from amdd.cli import main
from amdd.codegen.llm import TOKEN_ENV
from amdd.fixtures import data_dir, uvf_path

CONFIG = str(uvf_path("amdd.toml"))


def cli(*args, obj=None):
    return CliRunner().invoke(main, list(args), obj=obj, catch_exceptions=False)


@pytest.fixture
def project(tmp_path):
    """Writable copy of the packaged UV-fleet project."""
    target = tmp_path / "project"
    shutil.copytree(data_dir() / "uvf", target)
    return target


def test_validate():
    result = cli("validate", "--config", CONFIG)
    assert result.exit_code == 0
    assert "ontology: 8 concepts" in result.stdout and result.stdout.endswith("ok\n")


def test_validate_missing_ontology(project):
    (project / "uvf.onto").unlink()
    result = cli("validate", "--config", str(project / "amdd.toml"))
    assert result.exit_code == 1
    assert "uvf.onto" in result.stderr


def test_validate_constraint_on_unknown_class(project):
    with (project / "uvf.ocl").open("a") as f:
        f.write("\ncontext Submarine inv depth: self.depth > 0\n")
    result = cli("validate", "--config", str(project / "amdd.toml"))
    assert result.exit_code == 1
    assert "Submarine" in result.stderr


def test_validate_missing_config(tmp_path):
    result = cli("validate", "--config", str(tmp_path / "nope.toml"))
    assert result.exit_code == 1 and "not found" in result.stderr


def test_prompt_files_and_checksum(tmp_path):
    runs = []
    for name in ("a", "b"):
        assert cli("prompt", "--config", CONFIG, "--out", str(tmp_path / name)).exit_code == 0
        runs.append({p.name: p.read_bytes() for p in (tmp_path / name / "prompt").iterdir()})
    assert set(runs[0]) == {"structural.txt", "behavioral.txt", "constraints.txt", "bundle.txt"}
    assert runs[0] == runs[1]
    assert runs[0]["bundle.txt"].startswith(b"# checksum: ")


def test_prompt_without_ontology(tmp_path):
    assert cli("prompt", "--config", CONFIG, "--out", str(tmp_path), "--ontology", "off").exit_code == 0
    text = (tmp_path / "prompt" / "constraints.txt").read_text()
    assert "FleetPerformance" not in text and "UVList" not in text


def test_generate_template_both_variants(tmp_path):
    result = cli("generate", "--config", CONFIG, "--out", str(tmp_path))
    assert result.exit_code == 0
    root = tmp_path / "generate"
    for variant in ("ocl", "ocl_ontology"):
        assert {p.name for p in (root / variant).glob("*.dot")} == {
            "Operator.dot", "MCC.dot", "UVFManager.dot", "UV.dot"}
    table = json.loads((root / "comparison.json").read_text())
    assert "[comparison]" in result.stdout and table


def test_generate_single_variant(tmp_path):
    assert cli("generate", "--config", CONFIG, "--out", str(tmp_path), "--ontology", "off").exit_code == 0
    assert not (tmp_path / "generate" / "ocl_ontology").exists()
    assert not (tmp_path / "generate" / "comparison.json").exists()


def test_generate_llm_500s(tmp_path, monkeypatch):
    monkeypatch.setenv(TOKEN_ENV, "secret-token-1")
    obj = {"transport": httpx.MockTransport(lambda r: httpx.Response(500)), "sleep": lambda s: None}
    result = cli("generate", "--config", CONFIG, "--out", str(tmp_path), "--backend", "llm", obj=obj)
    assert result.exit_code == 2
    assert "secret-token-1" not in result.output


def test_generate_llm_without_token(tmp_path, monkeypatch):
    monkeypatch.delenv(TOKEN_ENV, raising=False)
    result = cli("generate", "--config", CONFIG, "--out", str(tmp_path), "--backend", "llm",
                 obj={"transport": httpx.MockTransport(lambda r: httpx.Response(200))})
    assert result.exit_code == 1 and TOKEN_ENV in result.stderr


def test_analyze_trivial_graph(tmp_path):
    (tmp_path / "one.dot").write_text("digraph one { a; }\n")
    result = cli("analyze", str(tmp_path / "one.dot"), "--json")
    assert result.exit_code == 0
    (report,) = json.loads(result.stdout)["reports"]
    assert (report["label"], report["M"]) == ("one", 1)


def test_analyze_bad_file_named_others_processed(tmp_path):
    (tmp_path / "good.dot").write_text("digraph good { a -> b; }\n")
    (tmp_path / "bad.dot").write_text("digraph bad { a -> ; }\n")
    result = cli("analyze", str(tmp_path / "bad.dot"), str(tmp_path / "missing.dot"), str(tmp_path / "good.dot"))
    assert result.exit_code == 1
    assert "bad.dot" in result.stderr and "missing.dot" in result.stderr
    assert "good" in result.stdout


def test_analyze_generated_directories(tmp_path):
    cli("generate", "--config", CONFIG, "--out", str(tmp_path))
    result = cli("analyze", str(tmp_path / "generate" / "ocl"), str(tmp_path / "generate" / "ocl_ontology"))
    assert result.exit_code == 0
    assert "[comparison]" in result.stdout and "TOTAL" in result.stdout


def test_analyze_reference_fixtures():
    ref = data_dir() / "reference_cfg"
    result = cli("analyze", str(ref / "ocl"), str(ref / "ocl_ontology"), "--json")
    payload = json.loads(result.stdout)
    before = [r for r in payload["reports"] if r["input"] == str(ref / "ocl")]
    assert {r["label"]: r["M"] for r in before} == {
        "Operator": 2, "MCC": 4, "UVFManager": 4, "UV": 2}
    assert payload["comparison"]["totals"]["dM"] == 5


def test_simulate_zero_uvs(tmp_path):
    result = cli("simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", "0")
    assert result.exit_code == 0
    summary = json.loads((tmp_path / "simulate" / "summary.json").read_text())
    assert summary["aborted"] and summary["messages"] == 4
    assert "aborted" in result.stdout


@pytest.mark.parametrize("flag,code", [("0", 1), ("4", 1), ("x", 2)])
def test_simulate_bad_controlled(tmp_path, flag, code):
    # out-of-range numbers are input errors; unparsable ones are usage errors
    result = cli("simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", "3", "--controlled", flag)
    assert result.exit_code == code


def test_simulate_idempotent(tmp_path):
    outputs = []
    for name in ("a", "b"):
        assert cli("simulate", "--config", CONFIG, "--out", str(tmp_path / name), "--uv-count", "3").exit_code == 0
        outputs.append({p.name: p.read_bytes() for p in (tmp_path / name / "simulate").iterdir()})
    assert outputs[0] == outputs[1]


def test_generate_idempotent(tmp_path):
    outputs = []
    for name in ("a", "b"):
        cli("generate", "--config", CONFIG, "--out", str(tmp_path / name))
        root = tmp_path / name / "generate"
        outputs.append({str(p.relative_to(root)): p.read_bytes() for p in root.rglob("*") if p.is_file()})
    assert outputs[0] == outputs[1]


def test_conform_malformed_trace(tmp_path):
    (tmp_path / "t.jsonl").write_text("not json\n")
    result = cli("conform", str(tmp_path / "t.jsonl"), "--config", CONFIG)
    assert result.exit_code == 1 and "t.jsonl" in result.stderr


def test_conform_missing_trace(tmp_path):
    result = cli("conform", str(tmp_path / "absent.jsonl"), "--config", CONFIG)
    assert result.exit_code == 1 and "absent.jsonl" in result.stderr


def test_conform_truncated_trace(tmp_path):
    cli("simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", "2")
    trace = tmp_path / "simulate" / "trace.jsonl"
    lines = trace.read_text().splitlines()
    kept = [line for line in lines if json.loads(line).get("concept") != "MissionPerformance"]
    trace.write_text("\n".join(kept) + "\n")
    result = cli("conform", str(trace), "--config", CONFIG, "--json")
    assert result.exit_code == 4
    assert json.loads(result.stdout)["missing"] == ["MissionPerformance"]


def test_default_project_writes_to_cwd_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli("simulate", "--uv-count", "1").exit_code == 0
    assert (tmp_path / "out" / "simulate" / "trace.jsonl").is_file()


def test_local_config_preferred(project, monkeypatch):
    monkeypatch.chdir(project)
    (project / "uvf.onto").unlink()
    assert cli("validate").exit_code == 1


def test_version_and_module_entry():
    assert cli("--version").stdout.startswith("amdd, version")
    proc = subprocess.run([sys.executable, "-m", "amdd", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
