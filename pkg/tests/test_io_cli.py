import json

import numpy as np
import pytest

from qcompress import cli
from qcompress.channelsynth import build_optimal_scheme
from qcompress.dimension import compression_dimension
from qcompress.generators import degree3_example, two_projections
from qcompress.io import (ParseError, observables_from_dict, observables_to_dict, read_scheme,
                          scheme_to_dict, write_json)
from qcompress.matcore import DimensionError, ObservableSet, apply_channel, dag, random_unitary


@pytest.fixture
def commuting_file(tmp_path):
    rng = np.random.default_rng(0)
    u = random_unitary(3, rng)
    ops = [u @ np.diag(rng.random(3)) @ dag(u) for _ in range(2)]
    path = tmp_path / "comm.json"
    write_json(path, observables_to_dict(ops))
    return path


def run(capsys, *argv):
    capsys.readouterr()
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_observables_round_trip():
    a, b = degree3_example()
    obs, names = observables_from_dict(json.loads(json.dumps(observables_to_dict([a, b],
                                                                               ["A", "B"]))))
    assert names == ["A", "B"]
    assert obs.dim == 3
    np.testing.assert_array_equal(obs.operators[0], a)


def test_parse_rejects_non_hermitian_and_mismatch():
    data = observables_to_dict([np.array([[0, 1], [0, 0]])])
    with pytest.raises(ParseError):
        observables_from_dict(data)
    data = observables_to_dict([np.eye(2)])
    data["dim"] = 3
    with pytest.raises(DimensionError):
        observables_from_dict(data)
    with pytest.raises(ParseError):
        observables_from_dict({"dim": 2})


def test_scheme_round_trip(tmp_path):
    p, q = two_projections(4, 2)
    obs = ObservableSet.from_matrices([p, q])
    rep = compression_dimension(obs)
    scheme = build_optimal_scheme(rep.reduced, rep)
    path = tmp_path / "s.json"
    write_json(path, scheme_to_dict(scheme))
    back = read_scheme(path)
    assert back.achieved_dim == scheme.achieved_dim
    assert back.classical_register == scheme.classical_register
    for i in range(4):
        rho = np.zeros((4, 4), dtype=complex)
        rho[i, i] = 1
        np.testing.assert_allclose(apply_channel(back.compress, rho),
                                   apply_channel(scheme.compress, rho), atol=1e-12)


def test_compress_then_verify(commuting_file, tmp_path, capsys):
    scheme = tmp_path / "scheme.json"
    code, out = run(capsys, "compress", str(commuting_file), "--scheme-out", str(scheme),
                    "--json")
    assert code == 0
    assert json.loads(out.out)["d"] == 1
    code, out = run(capsys, "verify", str(commuting_file), "--scheme", str(scheme), "--json")
    assert code == 0
    assert json.loads(out.out)["ok"]


def test_tampered_scheme_fails_verification(commuting_file, tmp_path, capsys):
    scheme = tmp_path / "scheme.json"
    run(capsys, "compress", str(commuting_file), "--scheme-out", str(scheme))
    data = json.loads(scheme.read_text())
    k = data["compress"]["kraus"][0]
    k["re"][0][0] += 0.3
    scheme.write_text(json.dumps(data))
    code, _ = run(capsys, "verify", str(commuting_file), "--scheme", str(scheme))
    assert code == 5


def test_exit_codes_for_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "analyze", str(bad))[0] == 2
    nh = tmp_path / "nh.json"
    write_json(nh, observables_to_dict([np.array([[0, 1], [0, 0]])]))
    assert run(capsys, "analyze", str(nh))[0] == 2
    mm = tmp_path / "mm.json"
    data = observables_to_dict([np.eye(2)])
    data["dim"] = 3
    write_json(mm, data)
    assert run(capsys, "analyze", str(mm))[0] == 4
    assert run(capsys, "gen", "nonsense")[0] == 2


def test_analyze_json_is_deterministic(tmp_path, capsys):
    path = tmp_path / "d3.json"
    write_json(path, observables_to_dict(list(degree3_example())))
    reports = []
    for _ in range(2):
        code, out = run(capsys, "analyze", str(path), "--json", "--seed", "3")
        assert code == 0
        rep = json.loads(out.out)
        rep.pop("timestamp")
        reports.append(rep)
    assert reports[0] == reports[1]
    assert reports[0]["dimension"]["compression_dimension"] == 3
    assert reports[0]["geometric_bound"]["bound"] == 1


def test_analyze_text_output(commuting_file, capsys):
    code, out = run(capsys, "analyze", str(commuting_file), "--no-bound")
    assert code == 0
    assert "compression_dimension: 1" in out.out


def test_gen_examples(tmp_path, capsys):
    for args, dim in ((["degree3"], 3), (["irred", "5"], 5), (["twoproj", "6", "42"], 6)):
        path = tmp_path / f"{args[0]}.json"
        assert run(capsys, "gen", *args, "-o", str(path))[0] == 0
        obs, _ = observables_from_dict(json.loads(path.read_text()))
        assert obs.dim == dim
    obs, _ = observables_from_dict(json.loads((tmp_path / "twoproj.json").read_text()))
    p = obs.operators[0]
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    assert round(np.trace(p).real) == 3


def test_planted_analyze(tmp_path, capsys):
    path = tmp_path / "planted.json"
    run(capsys, "gen", "planted", "claim1", "-o", str(path))
    code, out = run(capsys, "analyze", str(path), "--json", "--no-bound")
    rep = json.loads(out.out)
    assert code == 0
    assert rep["dimension"]["compression_dimension"] == 1
    assert rep["dimension"]["redundant_blocks"] == [0]
    assert rep["scheme"]["ok"]


def test_two_proj_command(tmp_path, capsys):
    path = tmp_path / "tp.json"
    write_json(path, observables_to_dict(list(two_projections(6, 1))))
    code, out = run(capsys, "two-proj", str(path), "--json")
    assert code == 0
    assert json.loads(out.out)["template_residual"] < 1e-8
