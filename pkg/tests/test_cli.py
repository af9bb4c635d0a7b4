import json
import subprocess
import sys
from importlib.resources import files

import jsonschema
import pytest
from referencing import Registry, Resource

from lmtiling.cli import main
from lmtiling.groups import GroupSpec


def _registry():
    resources = []
    for path in files("lmtiling").joinpath("schemas").iterdir():
        if path.name.endswith(".json"):
            schema = json.loads(path.read_text())
            resources.append((schema["$id"], Resource.from_contents(schema)))
    return Registry().with_resources(resources)


REGISTRY = _registry()


def validate(payload, name):
    schema = REGISTRY.contents(f"lmtiling/{name}")
    jsonschema.Draft202012Validator(schema, registry=REGISTRY).validate(payload)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    return code, json.loads(out), err


VERIFY = ["verify", "--group", "37", "--set", "1,10,26", "--n", "3", "--wt", "2", "--k1", "3", "--k2", "0"]


def test_verify_ok(capsys):
    code, data, _ = run_json(capsys, *VERIFY)
    assert code == 0 and data["verdict"] is True
    assert [r["method"] for r in data["reports"]] == ["bijection", "groupring"]
    validate(data, "verify")
    validate(data["manifest"], "manifest")


def test_verify_not_tiling(capsys):
    argv = list(VERIFY)
    argv[argv.index("1,10,26")] = "1,2,3"
    code, data, _ = run_json(capsys, *argv)
    assert code == 3 and data["verdict"] is False
    assert data["reports"][0]["witness"]["kind"] == "phi-collision"
    validate(data, "verify")


def test_verify_order_mismatch_is_usage_error(capsys):
    argv = list(VERIFY)
    argv[argv.index("37")] = "36"
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert json.loads(err)["error"] == "usage"


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--group", "37"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_format_before_subcommand(capsys):
    code, out, _ = run(capsys, "--format", "json", *VERIFY)
    assert code == 0 and json.loads(out)["verdict"] is True


def test_search_exhausted(capsys, tmp_path):
    cert_path = tmp_path / "cert.json"
    code, data, _ = run_json(capsys, "search", "--n", "4", "--k1", "3", "--k2", "0", "--out", str(cert_path))
    assert code == 0 and data["status"] == "exhausted"
    assert data["totals"]["solutions"] == 0
    validate(data, "certificate")
    validate(json.loads(cert_path.read_text()), "certificate")


def test_search_found_and_roundtrip(capsys):
    code, data, _ = run_json(capsys, "search", "--n", "3", "--k1", "3", "--k2", "0")
    assert code == 0 and data["status"] == "found"
    G = GroupSpec.parse(data["groups"][0]["group"])
    assert str(G) == "37"
    for sol in data["groups"][0]["solutions"]:
        elems = G.parse_element_list(",".join(sol))
        assert G.format_element_list(elems).split(",") == sol


def test_search_budget_and_resume(capsys, tmp_path):
    cert_path = tmp_path / "c.json"
    code, data, _ = run_json(
        capsys, "search", "--n", "5", "--k1", "3", "--k2", "0", "--budget", "500", "--out", str(cert_path)
    )
    assert code == 4 and data["status"] == "budget-exceeded"
    validate(data, "certificate")
    code, data, _ = run_json(capsys, "search", "--resume", str(cert_path))
    assert code == 0 and data["status"] == "exhausted"


def test_search_env_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("LMTILING_OUTPUT_DIR", str(tmp_path))
    code, _, _ = run(capsys, "search", "--n", "3", "--k1", "2", "--k2", "1")
    assert code == 0
    written = list(tmp_path.glob("*.json"))
    assert len(written) == 1
    validate(json.loads(written[0].read_text()), "certificate")


def test_search_rejects_n1(capsys):
    code, _, err = run(capsys, "search", "--n", "1", "--k1", "3", "--k2", "0")
    assert code == 2


def test_non_cyclic_elements_roundtrip(capsys):
    code, data, _ = run_json(capsys, "search", "--n", "5", "--k1", "1", "--k2", "0", "--group", "2x2x4")
    assert code == 0
    G = GroupSpec((2, 2, 4))
    sol = data["groups"][0]["solutions"][0]
    assert all(s.startswith("(") for s in sol)
    text = ",".join(sol)
    assert G.format_element_list(G.parse_element_list(text)) == text
    code, vdata, _ = run_json(capsys, "verify", "--group", "2x2x4", "--set", text, "--n", "5", "--k1", "1", "--k2", "0")
    assert code == 0 and vdata["verdict"]


def test_bounds(capsys):
    code, data, _ = run_json(capsys, "bounds", "--k1", "5", "--k2", "2")
    assert code == 0
    row = data["rows"][0]
    assert row["M"] == 3 and row["B"]["q"] == "324"
    validate(data, "bounds")
    code, data, _ = run_json(capsys, "bounds", "--grid", "6", "3")
    assert code == 0 and len(data["rows"]) > 3
    validate(data, "bounds")
    code, text, _ = run(capsys, "bounds", "--k1", "3", "--k2", "0")
    assert "59" in text


def test_bounds_inapplicable(capsys):
    code, _, err = run(capsys, "bounds", "--k1", "4", "--k2", "0")
    assert code == 2
    assert "inapplicable" in err


def test_psi(capsys):
    argv = ["psi", "--group", "37", "--set", "1,10,26", "--n", "3", "--k1", "3", "--k2", "0"]
    code, data, _ = run_json(capsys, *argv, "--m", "1", "2", "4", "--audit")
    assert code == 0
    validate(data, "psi")
    assert data["audit"]["passed"] and not data["audit"]["advisory"]
    code, text, _ = run(capsys, *argv, "--m", "4", "--audit", "--format", "text")
    assert "verified tiling" in text


def test_ball(capsys):
    code, data, _ = run_json(capsys, "ball", "--n", "3", "--wt", "2", "--k1", "3", "--k2", "0")
    assert code == 0 and data["size"] == 37
    validate(data, "ball")
    code, text, _ = run(capsys, "ball", "--n", "2", "--wt", "2", "--k1", "1", "--k2", "0", "--points")
    assert code == 0
    assert text.strip().splitlines()[-4:] == ["0,0", "1,0", "0,1", "1,1"]


@pytest.mark.parametrize("order, count", [(8, 3), (36, 4), (154, 1)])
def test_groups(capsys, order, count):
    code, data, _ = run_json(capsys, "groups", str(order), "--k1", "3", "--k2", "0")
    assert code == 0 and len(data["groups"]) == count
    validate(data, "groups")
    for g in data["groups"]:
        assert str(GroupSpec.parse(g["group"])) == g["group"]


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "lmtiling.cli", *VERIFY], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] is True
