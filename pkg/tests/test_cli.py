import json

import numpy as np
import pytest

from chancert import fileio
from chancert.channels import identity_channel
from chancert.cli import main
from chancert.constructions import (CNOT, TSIRELSON_WEIGHT, X, bell_basis_unitary, bipartite_unitary_channel,
                                    cross_section_point, entangling_gram)
from chancert.correlations import ConditionalDistribution, chsh, pr_box
from chancert.protocols import ProtocolSpec, random_measurements, sample_losr, tsirelson_strategy
from chancert.sampling import density_matrix


def write(tmp_path, name, f):
    p = tmp_path / name
    p.write_text(f.dumps())
    return str(p)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_matrix_file_roundtrip_is_exact(rng):
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    f = fileio.MatrixFile("state", m, {"state": [2, 2]})
    back = fileio.MatrixFile.from_json(json.loads(f.dumps()))
    assert np.array_equal(back.entries, m)
    doc = {"format": fileio.MATRIX_FORMAT, "kind": "gram", "entries": [[[1, 0], [0.1234567890123456, 0]],
                                                                       [[0.1234567890123456, 0], [1, 0]]]}
    g = fileio.MatrixFile.from_json(doc).to_object()
    assert g[0, 1] == 0.1234567890123456


def test_every_kind_roundtrips(rng):
    ch = sample_losr((2, 2), (2, 2), 2, 0)
    s = tsirelson_strategy()
    files = [fileio.channel_file(ch), fileio.distribution_file(pr_box()), fileio.state_file(density_matrix(2, rng)),
             fileio.gram_file(entangling_gram()), fileio.strategy_file(s), fileio.functional_file(chsh()),
             fileio.povm_file(random_measurements(2, 2, 3, rng)), fileio.state_family_file([np.eye(2) / 2], [np.eye(2) / 2])]
    for f in files:
        back = fileio.MatrixFile.from_json(json.loads(f.dumps()))
        assert back.kind == f.kind
        back.to_object()
    assert np.array_equal(fileio.MatrixFile.from_json(files[0].to_json()).to_object().choi, ch.choi)


def test_bad_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(fileio.FileFormatError):
        fileio.read_matrix(p)
    with pytest.raises(fileio.FileFormatError):
        fileio.MatrixFile.from_json({"format": "other", "kind": "state", "entries": []})
    with pytest.raises(fileio.FileFormatError):
        fileio.MatrixFile.from_json({"format": fileio.MATRIX_FORMAT, "kind": "state", "entries": [1, 2, 3]})
    with pytest.raises(fileio.FileFormatError):
        fileio.MatrixFile("choi", np.eye(3), {"in": [2], "out": [2]}).to_object()


def test_validate(tmp_path, capsys):
    code, out = run(capsys, "validate", write(tmp_path, "id.json", fileio.channel_file(identity_channel((2, 2)))))
    rep = json.loads(out.out)
    assert code == 0 and rep["valid"] and rep["seed"] is None and "wall_time" in rep
    code, out = run(capsys, "validate", write(tmp_path, "cnot.json", fileio.channel_file(bipartite_unitary_channel(CNOT))))
    rep = json.loads(out.out)
    assert code == 1
    qns = [c for c in rep["checks"] if c["check"] == "qns"][0]
    assert qns["verdict"] == "outside" and qns["residuals"]["bob_to_alice"] > 0.1
    code, _ = run(capsys, "validate", write(tmp_path, "g.json", fileio.gram_file(entangling_gram())))
    assert code == 0
    code, _ = run(capsys, "validate", write(tmp_path, "g2.json", fileio.gram_file(2 * np.eye(2))))
    assert code == 1


def test_parse_errors(tmp_path, capsys):
    assert run(capsys, "validate", tmp_path / "missing.json")[0] == 2
    p = tmp_path / "bad.json"
    p.write_text("[]")
    assert run(capsys, "certify", p)[0] == 2
    assert run(capsys, "noise-sweep", "--resolution", "1")[0] == 2
    assert run(capsys, "cross-section", "--resolution", "0")[0] == 2
    assert run(capsys, "nonsense")[0] == 2


def test_decohere(tmp_path, capsys):
    code, out = run(capsys, "decohere", write(tmp_path, "u.json", fileio.channel_file(bipartite_unitary_channel(bell_basis_unitary()))))
    s = fileio.MatrixFile.from_json(json.loads(out.out)).entries.real
    assert code == 0
    assert np.abs(s - 0.5 * (np.eye(4) + np.kron(X, X).real)).max() < 1e-15
    code, out = run(capsys, "decohere", write(tmp_path, "r.json", fileio.channel_file(sample_losr((2, 2), (2, 2), 2, 1))))
    s = fileio.MatrixFile.from_json(json.loads(out.out)).entries.real
    assert np.abs(s.sum(axis=0) - 1).max() < 1e-12


def test_certify(tmp_path, capsys):
    pr = write(tmp_path, "pr.json", fileio.distribution_file(pr_box()))
    code, out = run(capsys, "certify", pr, "--set", "local")
    rep = json.loads(out.out)
    assert code == 1 and rep["verdict"] == "outside" and rep["residuals"]["separation_margin"] > 0
    assert rep["witness"] is not None
    assert run(capsys, "certify", pr, "--set", "ns")[0] == 0
    edge = ConditionalDistribution(cross_section_point(TSIRELSON_WEIGHT, 1 - TSIRELSON_WEIGHT))
    code, out = run(capsys, "certify", write(tmp_path, "e.json", fileio.distribution_file(edge)), "--set", "npa1")
    assert code == 0 and abs(json.loads(out.out)["value"]) < 1e-5


def test_witness(tmp_path, capsys):
    ch = sample_losr((2, 2), (2, 2), 2, 2)
    code, out = run(capsys, "witness", write(tmp_path, "c.json", fileio.channel_file(ch)), "--set", "L")
    rep = json.loads(out.out)
    assert code == 0 and rep["witness_value"] >= -1e-9
    assert abs(rep["witness_value"] - (2 - rep["bell_value"])) < 1e-9


def test_noise_sweep_csv(tmp_path, capsys):
    code, out = run(capsys, "noise-sweep", "--resolution", "2")
    lines = out.out.split("\n")
    assert code == 0 and lines[0] == "p,q,negativity" and lines[-1] == ""
    vals = [float(line.split(",")[2]) for line in lines[1:-1]]
    assert np.abs(np.array(vals) - [0, 0, 0.5, 0]).max() < 1e-12
    target = tmp_path / "n.csv"
    run(capsys, "noise-sweep", "--resolution", "7", "-o", target)
    first = target.read_bytes()
    run(capsys, "noise-sweep", "--resolution", "7", "-o", target)
    assert target.read_bytes() == first and b"\r" not in first


def test_cross_section_csv(capsys):
    code, out = run(capsys, "cross-section", "--resolution", "5")
    lines = out.out.strip().split("\n")
    assert code == 0 and lines[0] == "s,t,region" and len(lines) == 26
    rows = {(float(a), float(b)): r for a, b, r in (line.split(",") for line in lines[1:])}
    assert rows[(0.0, 0.0)] == "local" and rows[(1.0, 0.0)] == "ns" and rows[(1.0, 1.0)] == "signaling-excluded"
    assert set(rows.values()) <= {"local", "npa1", "npa2", "ns", "signaling-excluded"}


def test_simulate(tmp_path, capsys, rng):
    states = [density_matrix(4, rng) for _ in range(2)]
    spec = ProtocolSpec("b", states, states, random_measurements(4, 1, 2, rng), random_measurements(4, 1, 2, rng), (2, 2))
    p = tmp_path / "proto.json"
    p.write_text(json.dumps(fileio.protocol_to_json(spec, sample_losr((2, 2), (2, 2), 2, 0))))
    code, out = run(capsys, "simulate", p)
    dist = fileio.MatrixFile.from_json(json.loads(out.out)).to_object()
    assert code == 0 and dist.cardinalities == (2, 2, 2, 2)
    code, _ = run(capsys, "certify", write(tmp_path, "d.json", fileio.distribution_file(dist)))
    assert code == 0


def test_lose_and_seesaw(tmp_path, capsys):
    code, out = run(capsys, "lose-from-strategy", write(tmp_path, "s.json", fileio.strategy_file(tsirelson_strategy())))
    assert code == 0
    chan = tmp_path / "lose.json"
    chan.write_text(out.out)
    code, out = run(capsys, "certify", chan, "--set", "local")
    assert code == 1
    code, out = run(capsys, "certify", chan, "--set", "npa2")
    assert code == 0
    plus = np.full((2, 2), 0.5)
    inputs = [np.kron(np.diag(np.eye(2)[x]), plus) for x in range(2)]
    fam = write(tmp_path, "in.json", fileio.state_family_file(inputs, inputs, (2, 2)))
    idc = write(tmp_path, "id.json", fileio.channel_file(identity_channel((2, 2))))
    code, out = run(capsys, "seesaw", idc, fam, "--restarts", "3", "--seed", "4")
    rep = json.loads(out.out)
    assert code == 0 and rep["seed"] == 4 and rep["value"] <= 2 + 1e-9
    _, out2 = run(capsys, "seesaw", idc, fam, "--restarts", "3", "--seed", "4")
    assert json.loads(out2.out)["restart_values"] == rep["restart_values"]
