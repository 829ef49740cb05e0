from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from arenkit.cli import CSV_COLUMNS, main, parse_spec, read_arch, spec_to_doc
from arenkit.errors import SpecError
from arenkit.lattice import infer_architecture
from arenkit.systems import random_stable_system

DI = {"A": [[1, 1], [0, 1]], "B": [[0.5], [1]], "C": [[1, 0]], "Q": [[1, 0], [0, 1]], "R": [[1]],
      "riccati": True, "Nc": 2, "y_min": [-1], "y_max": [1], "u_min": [-1], "u_max": [1]}


@pytest.fixture
def di_file(tmp_path):
    path = tmp_path / "di.json"
    path.write_text(json.dumps(DI))
    return path


def test_arch_file(di_file, tmp_path, capsys):
    out = tmp_path / "arch.json"
    assert main(["arch", "--spec", str(di_file), "--out", str(out)]) == 0
    arch, meta = read_arch(out)
    n_est, m_est = int(meta["n_est"]), int(meta["m_est"])
    assert n_est <= 1024 and meta["rho"] == 10 and meta["omega"] == 3
    assert meta["riccati"] is True
    with pytest.warns(ResourceWarning):
        assert arch == infer_architecture(n_est, m_est, 2, 1)
    assert int(meta["param_count"]) == arch.param_count
    assert "2^rho=1024" in capsys.readouterr().out


def test_arch_is_deterministic(di_file, tmp_path):
    docs = []
    for k in range(2):
        out = tmp_path / f"a{k}.json"
        main(["arch", "--spec", str(di_file), "--out", str(out)])
        doc = json.loads(out.read_text())
        doc.pop("timing")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_missing_key_names_it(di_file, tmp_path, capsys):
    doc = dict(DI)
    del doc["R"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["arch", "--spec", str(bad), "--out", str(tmp_path / "x.json")]) == 1
    assert "R" in capsys.readouterr().err


def test_corrupt_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": [[1]],\n "B": ')
    assert main(["verify", "--spec", str(bad), "--samples", "10"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_non_stabilizable_riccati_is_a_solver_error(tmp_path):
    doc = dict(DI, A=[[1.0, 0.0], [0.0, 1.0]], B=[[0.0], [0.0]])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    assert main(["count", "--spec", str(path)]) == 2


def test_riccati_with_output_sized_weight_is_a_parse_error(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(dict(DI, Q=[[1.0]])))
    assert main(["count", "--spec", str(path)]) == 1
    assert "'Q'" in capsys.readouterr().err


def test_explicit_p_without_k(tmp_path):
    doc = dict(DI)
    del doc["riccati"]
    doc["P"] = [[2.0, 0.0], [0.0, 2.0]]
    spec, opts = parse_spec(doc)
    assert spec.K.shape == (1, 2) and opts["budget_seconds"] is None
    with pytest.raises(SpecError):
        parse_spec({k: v for k, v in doc.items() if k != "P"})


def test_spec_round_trip():
    spec = random_stable_system(3, seed=4)
    back, _ = parse_spec(spec_to_doc(spec))
    for k in ("A", "B", "C", "P", "Q", "R", "K"):
        np.testing.assert_array_equal(getattr(back, k), getattr(spec, k))


def test_timeout_exit_code(di_file, tmp_path):
    out = tmp_path / "t.json"
    assert main(["arch", "--spec", str(di_file), "--out", str(out), "--budget", "0"]) == 3
    _, meta = read_arch(out)
    assert meta["complete"] is False and meta["n_est"] == "1024"


def test_verify_passes_on_double_integrator(di_file, capsys):
    assert main(["verify", "--spec", str(di_file), "--samples", "2000", "--seed", "42"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5


def test_verify_refuses_large_problems(tmp_path):
    doc = spec_to_doc(random_stable_system(2, m=1, l=2, N_c=3))
    path = tmp_path / "big.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", "--spec", str(path), "--samples", "10"]) == 4


def _bench(tmp_path, sweep, workers=1):
    desc, out = tmp_path / "sweep.json", tmp_path / "out.csv"
    desc.write_text(json.dumps(sweep))
    assert main(["bench", "--sweep", str(desc), "--out", str(out), "--workers", str(workers)]) == 0
    with open(out) as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == CSV_COLUMNS
        return list(reader)


def test_bench_fixed_rho_over_states(tmp_path):
    rows = _bench(tmp_path, {"n": [2, 3, 4, 5, 6], "Nc": 2}, workers=2)
    assert [int(r["n"]) for r in rows] == [2, 3, 4, 5, 6]
    assert {r["rho"] for r in rows} == {"10"}
    assert {r["status"] for r in rows} == {"ok"}


def test_bench_growing_horizon(tmp_path):
    rows = _bench(tmp_path, {"n": 2, "Nc": [2, 3, 4]})
    assert [int(r["rho"]) for r in rows] == [10, 14, 18]
    assert [r["two_pow_rho"] for r in rows] == [str(2**10), str(2**14), str(2**18)]


def test_bench_empty_sweep(tmp_path):
    assert _bench(tmp_path, {"instances": []}) == []
