import json

import numpy as np
import pytest

from contactpd import cli, shapes


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def meshes(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    a = d / "a.off"
    b = d / "b.off"
    shapes.cube().save(a)
    shapes.cube().save(b)
    return str(a), str(b)


@pytest.fixture(scope="module")
def small_db(meshes, tmp_path_factory):
    a, b = meshes
    d = tmp_path_factory.mktemp("db")
    db = d / "cube.jsonl"
    code = run("precompute", "--model-a", a, "--model-b", b,
               "--budget", "400", "--rng-seed", "11",
               "--dedup-radius", "0.02", "--db", str(db))
    assert code == 0
    return str(db)


def test_genmesh_all_shapes(tmp_path):
    for shape in shapes.SHAPES:
        out = tmp_path / f"{shape}.off"
        assert run("genmesh", "--shape", shape, "--out", str(out)) == 0
        assert out.exists()


def test_precompute_writes_stats(meshes, tmp_path):
    a, b = meshes
    db = tmp_path / "x.jsonl"
    stats = tmp_path / "x.stats.json"
    code = run("precompute", "--model-a", a, "--model-b", b,
               "--budget", "120", "--rng-seed", "3",
               "--dedup-radius", "0.02", "--db", str(db),
               "--out", str(stats))
    assert code == 0
    payload = json.loads(stats.read_text())
    assert payload["seeds"] + payload["propagated"] == 120
    assert payload["ccd_calls"] >= payload["seeds"]
    assert "t_ccd_over_t_dcd" in payload


def test_precompute_deterministic(meshes, tmp_path):
    a, b = meshes
    blobs = []
    for k in range(2):
        db = tmp_path / f"d{k}.jsonl"
        assert run("precompute", "--model-a", a, "--model-b", b,
                   "--budget", "200", "--rng-seed", "21",
                   "--dedup-radius", "0.02", "--db", str(db)) == 0
        blobs.append(db.read_bytes())
    assert blobs[0] == blobs[1]


def test_precompute_budget_zero_usage_error(meshes, tmp_path):
    a, b = meshes
    assert run("precompute", "--model-a", a, "--model-b", b,
               "--budget", "0", "--db", str(tmp_path / "z.jsonl")) == 2


def test_query_csv_schema_and_values(meshes, small_db, tmp_path):
    a, b = meshes
    qcsv = tmp_path / "q.csv"
    qcsv.write_text("0.4,0,0,1,0,0,0\n0.05,0,0,1,0,0,0\n3.0,0,0,1,0,0,0\n")
    out = tmp_path / "r.csv"
    assert run("query", "--model-a", a, "--model-b", b, "--db", small_db,
               "--queries", str(qcsv), "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(cli.QUERY_CSV_COLUMNS)
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 4  # 3 queries + summary
    assert float(rows[0][1]) == pytest.approx(0.6, rel=0.05)
    assert float(rows[1][1]) == pytest.approx(0.95, rel=0.05)
    assert rows[2][1] == "0.0" and rows[2][10] == "not_penetrating"
    assert rows[3][0] == "mean"
    for row in rows[:3]:
        assert row[10] in ("ok", "not_penetrating")
        float(row[11])  # micros parse


def test_query_db_mesh_mismatch_exit_code(meshes, small_db, tmp_path):
    a, _ = meshes
    wrong = tmp_path / "wrong.off"
    shapes.torus().save(wrong)
    qcsv = tmp_path / "q.csv"
    qcsv.write_text("0.4,0,0,1,0,0,0\n")
    code = run("query", "--model-a", a, "--model-b", str(wrong),
               "--db", small_db, "--queries", str(qcsv),
               "--out", str(tmp_path / "r.csv"))
    assert code == 3


def test_validate_fresh_db(meshes, small_db):
    a, b = meshes
    assert run("validate", "--model-a", a, "--model-b", b,
               "--db", small_db) == 0


def test_validate_flags_perturbed_sample(meshes, small_db, tmp_path,
                                         capsys):
    a, b = meshes
    lines = open(small_db).read().splitlines()
    row = json.loads(lines[5])
    # push the pose radially outward by 10 eps_contact: the gap must grow
    # past the certificate tolerance
    t = np.asarray(row["q"][:3])
    t *= 1.0 + 10 * 1e-4 * np.sqrt(3) / np.linalg.norm(t)
    row["q"][:3] = list(t)
    lines[5] = json.dumps(row, sort_keys=True, separators=(",", ":"))
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    code = run("validate", "--model-a", a, "--model-b", b, "--db", str(bad))
    assert code == 4
    assert "sample 4" in capsys.readouterr().err


def test_convergence_csv(meshes, tmp_path):
    a, b = meshes
    out = tmp_path / "conv.csv"
    code = run("convergence", "--model-a", a, "--model-b", b,
               "--budget", "1500", "--rng-seed", "8",
               "--dedup-radius", "0.02", "--n-queries", "8",
               "--ndirs", "64", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(cli.CONVERGENCE_CSV_COLUMNS)
    sizes = [int(line.split(",")[0]) for line in lines[1:]]
    errors = [float(line.split(",")[1]) for line in lines[1:]]
    assert sizes == [100, 1000, 1500]
    assert errors[-1] <= errors[0] + 1e-9


def test_oracle_csv(meshes, tmp_path):
    a, b = meshes
    qcsv = tmp_path / "q.csv"
    qcsv.write_text("0.4,0,0,1,0,0,0\n3.0,0,0,1,0,0,0\n")
    out = tmp_path / "orc.csv"
    assert run("oracle", "--model-a", a, "--model-b", b,
               "--queries", str(qcsv), "--ndirs", "64",
               "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(cli.ORACLE_CSV_COLUMNS)
    assert float(lines[1].split(",")[1]) == pytest.approx(0.6, abs=1e-3)
    assert float(lines[2].split(",")[1]) == 0.0


def test_missing_required_flag_is_usage_error(tmp_path):
    assert run("precompute", "--model-a", "nope.off") == 2


def test_runtime_failure_exit_code(tmp_path):
    code = run("precompute", "--model-a", "missing_a.off",
               "--model-b", "missing_b.off",
               "--db", str(tmp_path / "d.jsonl"))
    assert code == 4
