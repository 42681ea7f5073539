import json
import subprocess
import sys

import pytest

from geotorsion.cli import EXIT_INPUT, EXIT_NUMERIC, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def torus_file(tmp_path, capsys):
    code, out, _ = run(capsys, "catalog", "filled_torus")
    assert code == 0
    p = tmp_path / "torus.json"
    p.write_text(out)
    return str(p)


def test_validate(capsys, torus_file):
    code, out, err = run(capsys, "validate", torus_file)
    data = json.loads(out)
    assert code == 0
    assert data["tetrahedra"] == 6
    assert data["edges"] == {"inner": 2, "boundary": 12}
    assert data["boundary"]["genus"] == 1
    assert "genus-1" in err


def test_invariant_level_two(capsys):
    code, out, _ = run(capsys, "invariant", "catalog:filled_torus", "--level", "2", "--seed", "3")
    data = json.loads(out)
    assert code == 0
    assert len(data["components"]) == 66 * 66
    assert len(data["nonvanishing"]["2"]) == 16


def test_invariant_low_levels_vanish(capsys):
    code, out, _ = run(capsys, "invariant", "catalog:filled_torus", "--level", "1", "--all-levels")
    data = json.loads(out)
    assert data["nonvanishing"] == {"0": [], "1": []}


def test_invariant_closed(capsys):
    code, out, _ = run(capsys, "invariant", "catalog:glued_pair[third-turn]", "--closed", "--seed", "2")
    data = json.loads(out)
    assert code == 0
    assert data["invariant"] == pytest.approx(-1.0, rel=1e-6)
    assert max(data["residuals"].values()) < 1e-9


def test_invariant_extended(capsys):
    code, out, _ = run(capsys, "invariant", "catalog:glued_pair[sixth-turn]", "--closed", "--precision", "extended")
    assert code == 0
    assert json.loads(out)["invariant"] == pytest.approx(-1.0, rel=1e-12)


def test_realization_file(capsys, tmp_path):
    real = tmp_path / "r.json"
    real.write_text(json.dumps({"coords": {"A": [0, 0, 0], "B": [1, 0, 0], "C": [0, 1, 0], "D": [0, 0, 1]}}))
    code, _, _ = run(capsys, "invariant", "catalog:filled_torus", "--level", "0", "--realization", str(real))
    assert code == 0
    real.write_text(json.dumps({"coords": {"A": [0, 0, 0]}}))
    code, _, err = run(capsys, "invariant", "catalog:filled_torus", "--level", "0", "--realization", str(real))
    assert code == EXIT_INPUT
    assert "lacks coordinates" in err


def test_degenerate_realization_is_numeric_error(capsys, tmp_path):
    real = tmp_path / "r.json"
    real.write_text(json.dumps({"coords": {"A": [0, 0, 0], "B": [1, 0, 0], "C": [0, 1, 0], "D": [1, 1, 0]}}))
    code, _, err = run(capsys, "invariant", "catalog:filled_torus", "--level", "0", "--realization", str(real))
    assert code == EXIT_NUMERIC
    assert "Degenerate" in err


def test_move_script(capsys, tmp_path):
    script = tmp_path / "moves.json"
    script.write_text(json.dumps([{"kind": "1-3", "tet": 0, "face": 0}, {"kind": "3-1", "vertex": "E"}]))
    code, out, _ = run(capsys, "move", "catalog:filled_torus", str(script), "--level", "1", "--seed", "3")
    data = json.loads(out)
    assert code == 0
    assert [m["kind"] for m in data["moves"]] == ["1-3", "3-1"]
    for t in data["transforms"]:
        assert t["check"]["relative_error"] < 1e-6


def test_move_bad_site(capsys, tmp_path):
    script = tmp_path / "moves.json"
    script.write_text(json.dumps([{"kind": "3-2", "edge": "AB_1"}]))
    code, _, err = run(capsys, "move", "catalog:filled_torus", str(script))
    assert code == EXIT_INPUT
    assert "SiteNotApplicable" in err


def test_glue_preset(capsys):
    code, out, _ = run(capsys, "glue", "--preset", "third-turn", "--seed", "1")
    data = json.loads(out)
    assert code == 0
    assert data["discrepancy"] < 1e-6
    assert data["glueing"]["s"] == 6


def test_glue_files(capsys, tmp_path):
    from geotorsion.catalog import filled_torus
    from geotorsion.glueing import boundary_automorphisms, identification_to_json, mirror_pairs
    from geotorsion.triangulation import mirror

    torus = filled_torus().triangulation
    (tmp_path / "m1.json").write_text(json.dumps(torus.to_json()))
    (tmp_path / "m2.json").write_text(json.dumps(mirror(torus).to_json()))
    ident = identification_to_json(mirror_pairs(torus, boundary_automorphisms(torus)[5]))
    (tmp_path / "id.json").write_text(json.dumps(ident))
    code, out, _ = run(capsys, "glue", *(str(tmp_path / n) for n in ("m1.json", "m2.json", "id.json")))
    data = json.loads(out)
    assert code == 0
    assert data["both_vanish"] or data["discrepancy"] < 1e-6


def test_glue_needs_arguments(capsys):
    code, _, _ = run(capsys, "glue")
    assert code == EXIT_INPUT


def test_report(capsys, tmp_path):
    out_dir = tmp_path / "rep"
    code, out, _ = run(capsys, "report", "catalog:filled_torus", "--out", str(out_dir), "--level", "1")
    assert code == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["f3.csv", "f3_factors.csv", "f3_factors.png", "invariants.csv", "level1.png"]
    assert (out_dir / "invariants.csv").read_text().startswith("level,C,D,value")


def test_malformed_json_points_at_line(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "tetrahedra": [["A","B","C","D"]],\n  "gluings": [,]\n}\n')
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT
    assert "bad.json:3:" in err
    assert '"gluings": [,]' in err


def test_unknown_field(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tetrahedra": [["A", "B", "C", "D"]], "colour": "red"}))
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT
    assert "colour" in err


def test_invalid_triangulation(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tetrahedra": [["A", "A", "C", "D"]]}))
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT
    assert "RepeatedVertex" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "validate", "/nonexistent/t.json")
    assert code == EXIT_INPUT
    assert "cannot read" in err


def test_unknown_catalog(capsys):
    code, _, _ = run(capsys, "catalog", "klein_bottle")
    assert code == EXIT_INPUT


def test_out_file(capsys, tmp_path):
    target = tmp_path / "o.json"
    code, out, _ = run(capsys, "catalog", "single_tetrahedron", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["tetrahedra"] == [["A", "B", "C", "D"]]


def test_byte_identical_runs(tmp_path):
    cmd = [sys.executable, "-m", "geotorsion.cli", "invariant", "catalog:filled_torus", "--level", "2", "--seed", "5"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and len(a) > 1000


def test_report_png_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["report", "catalog:filled_torus", "--out", str(tmp_path / name), "--level", "1"]) == 0
    capsys.readouterr()
    for f in ("f3_factors.png", "level1.png", "invariants.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_empty_move_script_is_identity(capsys, torus_file):
    code, out, _ = run(capsys, "move", torus_file, "-")
    data = json.loads(out)
    assert code == 0
    assert data["moves"] == [] and data["transforms"] == []
    assert data["triangulation"] == json.loads(open(torus_file).read())


def test_non_manifold_input(capsys, tmp_path):
    tets = [["A", "B", "C", "D"], ["B", "A", "C", "D"], ["B", "A", "C", "D"]]
    gl = [{"tet": 0, "face": 3, "to_tet": 1, "to_face": 3, "corner_map": [0, 1, 2]},
          {"tet": 0, "face": 3, "to_tet": 2, "to_face": 3, "corner_map": [0, 1, 2]}]
    bad = tmp_path / "nm.json"
    bad.write_text(json.dumps({"tetrahedra": tets, "gluings": gl}))
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT
    assert "NonManifoldGluing" in err
