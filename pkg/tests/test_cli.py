import json

import pytest

from fracbvp.cli import canonical_json, config_hash, run, validate

CIRCLE_JOB = {
    "n": 2,
    "boundary": {"kind": "circle", "radius": 1.0},
    "g": {"kind": "smooth"},
    "nu": 1.0,
    "resolution": 2**-6,
    "n_probes": 32,
}


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(capsys, argv):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _report(capsys, argv, expect=0):
    code, out, err = _run(capsys, argv)
    assert code == expect, err
    doc = json.loads(out)
    validate(doc, "report.schema.json")
    assert doc["config_sha256"] == config_hash(doc["config"])
    return doc


def test_canonical_json_is_sorted_and_stable():
    a = canonical_json({"b": 1, "a": [1.5, {"d": 2, "c": 3}]})
    assert a == canonical_json({"a": [1.5, {"c": 3, "d": 2}], "b": 1})
    assert a.index('"a"') < a.index('"b"')


def test_curve_census(capsys, tmp_path):
    svg = tmp_path / "curve.svg"
    doc = _report(capsys, ["curve", "--alpha", "1.05", "--beta", "2.2", "--depth", "4", "--svg", str(svg)])
    census = doc["result"]["census"]
    assert [c["count"] for c in census] == [2**c["floor_m_beta"] for c in census]
    assert all(c["count_is_2_pow_floor"] and c["spacing_exact"] for c in census)
    assert svg.read_text().lstrip().startswith("<")


def test_exponents_report(capsys):
    doc = _report(capsys, ["exponents", "--alpha", "1.05", "--beta", "2.2", "--depth", "5", "--grid", "17"])
    res = doc["result"]
    assert json.dumps(res).count("0.642857") >= 1


def test_check_certified_and_not(capsys):
    doc = _report(capsys, ["check", "--nu", "0.7", "--alpha", "1.05", "--beta", "2.2"])
    assert doc["status"] == "ok"
    doc = _report(capsys, ["check", "--nu", "0.6", "--alpha", "1.05", "--beta", "2.2"], expect=2)
    assert doc["status"] == "not-certified"


def test_whitney_audit(capsys, tmp_path):
    job = dict(CIRCLE_JOB, sample_spacing=2**-5, whitney_depth=7, n_probes=200)
    doc = _report(capsys, ["whitney-audit", "--config", _write(tmp_path, "w.json", job)])
    res = doc["result"]
    assert res["proportionality_fraction"] == 1.0
    assert res["partition_of_unity_deviation"] <= 1e-12
    assert res["interpolation_error"] == 0.0


def test_solve_jump_with_field(capsys, tmp_path):
    field = tmp_path / "field.csv"
    job = dict(CIRCLE_JOB, field_grid=9)
    argv = ["solve-jump", "--config", _write(tmp_path, "j.json", job), "--field", str(field)]
    doc = _report(capsys, argv)
    assert doc["result"]["oracle"]["max_relative_error"] < 0.05
    lines = field.read_text().splitlines()
    assert lines[0].startswith("x1,x2,c0") and len(lines) == 82


def test_solve_rbvp_exit_codes(capsys, tmp_path):
    job = dict(CIRCLE_JOB, G={"kind": "index-one-example"})
    job.pop("n_probes")
    doc = _report(capsys, ["solve-rbvp2d", "--config", _write(tmp_path, "r1.json", job)])
    assert doc["result"]["rbvp"]["index"] == 1
    job["G"] = {"kind": "power", "k": 2}
    doc = _report(capsys, ["solve-rbvp2d", "--config", _write(tmp_path, "r2.json", job)], expect=2)
    assert doc["result"]["rbvp"]["conditions_real_per_branch"] == 2


@pytest.mark.parametrize(
    "job",
    [
        {"n": 2, "boundary": {"kind": "circle"}, "g": {"kind": "smooth"}},
        dict(CIRCLE_JOB, unknown_key=1),
        dict(CIRCLE_JOB, nu=1.5),
        dict(CIRCLE_JOB, boundary={"kind": "square"}),
    ],
)
def test_bad_config_is_rejected(capsys, tmp_path, job):
    code, out, err = _run(capsys, ["solve-jump", "--config", _write(tmp_path, "bad.json", job)])
    assert code == 1 and out == ""
    assert "error" in json.loads(err)


def test_bad_arguments(capsys, tmp_path):
    for argv in (["curve", "--alpha", "1.05"], ["nonsense"], ["solve-jump", "--config", str(tmp_path / "missing.json")]):
        code, _, err = _run(capsys, argv)
        assert code == 1
        assert json.loads(err)["error"]


def test_reports_are_deterministic(capsys, tmp_path):
    cfg = _write(tmp_path, "j.json", CIRCLE_JOB)
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert run(["solve-jump", "--config", cfg, "--seed", "7", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
