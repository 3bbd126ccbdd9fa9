import csv
import io
import json

import pytest

from robustparity.benchlab import example1_family, random_instance
from robustparity.cli import SWEEP_HEADER, main
from robustparity.documents import DocumentError, dumps, parse_document, to_document
from robustparity.game_core import MarkovChain, StructureKind


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, G, obj=None):
    from robustparity.game_core import DiscountSpec, ParityObjective

    doc = to_document(
        G,
        obj if isinstance(obj, ParityObjective) else None,
        obj if isinstance(obj, DiscountSpec) else None,
    )
    path.write_text(dumps(doc))
    return path


@pytest.mark.parametrize("kind", [k.value for k in StructureKind])
def test_document_round_trip(kind):
    G, p = random_instance(kind, 4, 2, seed=3, objective="parity")
    if kind == "markov-chain":
        from robustparity.game_core import as_chain

        G = as_chain(G)
    text = dumps(to_document(G, p))
    _, loaded = parse_document(text)
    assert loaded.structure == G
    assert loaded.priority == p
    assert dumps(to_document(loaded.structure, loaded.priority)) == text


def test_parse_rejects_unknown_fields_and_bad_kind():
    G1, _, _ = example1_family(0.1)
    doc = to_document(G1)
    doc["extra"] = 1
    with pytest.raises(DocumentError, match="extra"):
        parse_document(json.dumps(doc))
    G = random_instance("turn-based", 3, 2, seed=1)
    doc = to_document(G)
    doc["kind"] = "concurrent"
    with pytest.raises(DocumentError, match="kind"):
        parse_document(json.dumps(doc))
    with pytest.raises(DocumentError):
        parse_document("{not json")


def test_family_then_distance(tmp_path, capsys):
    code, _, _ = run(["family", "example1", "--eps", "0.1", "-o", tmp_path / "ex1"], capsys)
    assert code == 0
    code, out, _ = run(["distance", tmp_path / "ex1" / "G1.json", tmp_path / "ex1" / "G2.json"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["dist_A"] == pytest.approx(0.1)
    assert rep["structurally_equivalent"] is False
    assert rep["dist_R"] == "inf"


def test_certify_identical_and_inequivalent(tmp_path, capsys):
    run(["family", "example1", "--eps", "0.1", "-o", tmp_path / "ex1"], capsys)
    g1 = tmp_path / "ex1" / "G1.json"
    code, out, _ = run(["certify", g1, g1, "--objective", "parity"], capsys)
    assert code == 0 and json.loads(out)["certificate"]["holds"]
    code, out, _ = run(["certify", g1, tmp_path / "ex1" / "G2.json", "--objective", "parity"], capsys)
    assert code == 1
    assert json.loads(out)["certificate"]["structurally_equivalent"] is False


def test_validate_exit_codes(tmp_path, capsys):
    good = write(tmp_path / "g.json", random_instance("concurrent", 3, 2, seed=0))
    assert run(["validate", good], capsys)[0] == 0
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"kind": "markov-chain", "states": ["a"], "delta": [{"state": "a", "dist": {"a": 0.4}}]}))
    code, out, _ = run(["validate", bad], capsys)
    assert code == 1
    assert json.loads(out)["diagnostics"][0]["rule"] == "distribution sum"
    junk = tmp_path / "j.json"
    junk.write_text('{"kind": "markov-chain", "states": [], "delta": [], "surprise": true}')
    code, _, err = run(["validate", junk], capsys)
    assert code == 2 and "surprise" in err
    assert run(["solve", tmp_path / "missing.json", "--objective", "parity"], capsys)[0] == 2


def test_solve_each_kind(tmp_path, capsys):
    for kind in StructureKind:
        n = 4 if kind is StructureKind.TURN_BASED else 3
        G, p = random_instance(kind, n, 2, seed=2, objective="parity")
        f = write(tmp_path / f"{kind.value}.json", G, p)
        code, out, _ = run(["solve", f, "--objective", "parity"], capsys)
        rep = json.loads(out)
        assert code == 0, rep
        assert set(rep["values"]) == set(G.states)
        _, spec = random_instance(kind, n, 2, seed=2, objective="multidiscounted")
        f = write(tmp_path / f"{kind.value}-d.json", G, spec)
        code, out, _ = run(["solve", f, "--objective", "multidiscounted"], capsys)
        assert code == 0


def test_solve_with_schedule(tmp_path, capsys):
    G, p = random_instance("turn-based", 3, 2, seed=5, objective="parity")
    f = write(tmp_path / "tb.json", G, p)
    code, out, _ = run(["solve", f, "--objective", "parity", "--schedule", "asc,4,10"], capsys)
    rep = json.loads(out)
    assert rep["solver"]["method"] == "nested-discount-limits"
    assert rep["solver"]["k_max"] == 10
    code, _, _ = run(["solve", f, "--objective", "parity", "--schedule", "s0:s1,4,10"], capsys)
    assert code == 2


def test_bound_command(capsys):
    code, out, _ = run(["bound", "--n", 4, "--ratio", 0.01], capsys)
    assert json.loads(out)["bound"] == pytest.approx(0.0828567056280801)
    code, out, _ = run(["bound", "--n", 4, "--abs", 0.005, "--eta", 0.5, "--beta", "--eps", 0.1], capsys)
    rep = json.loads(out)
    assert "bound" in rep and "beta" in rep
    assert run(["bound", "--n", 4], capsys)[0] == 2
    assert run(["bound", "--n", 0, "--ratio", 0.1], capsys)[0] == 2
    assert run(["bound", "--n", 3, "--abs", 0.1, "--eta", 1.5], capsys)[0] == 2


def test_perturb_and_sweep(tmp_path, capsys):
    run(["family", "example2", "--n", 5, "-o", tmp_path / "line.json"], capsys)
    line = tmp_path / "line.json"
    code, _, _ = run(["perturb", line, "--eps", 1e-3, "--seed", 2**64 - 1, "-o", tmp_path / "p.json"], capsys)
    assert code == 0
    code, out, _ = run(["distance", line, tmp_path / "p.json"], capsys)
    assert json.loads(out)["dist_A"] <= 1e-3
    code, out, _ = run(["sweep", line, "--eps-list", "1e-2,1e-3,1e-4", "--samples", 2, "--seed", 7], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == SWEEP_HEADER
    assert [float(r[0]) for r in rows[1:]] == [1e-2, 1e-2, 1e-3, 1e-3, 1e-4, 1e-4]
    assert all(float(r[2]) <= float(r[3]) for r in rows[1:])
    assert "\r" not in out
    with pytest.raises(SystemExit):
        main(["perturb", str(line), "--eps", "0.1", "--seed", str(2**64)])


def test_perturb_too_large_fails(tmp_path, capsys):
    run(["family", "example2", "--n", 2, "-o", tmp_path / "line.json"], capsys)
    code, out, _ = run(["perturb", tmp_path / "line.json", "--eps", 0.6, "--seed", 1], capsys)
    assert code == 1 and "PerturbationTooLarge" in json.loads(out)["error"]


def test_reports_are_byte_identical(tmp_path, capsys):
    run(["family", "random", "--kind", "turn-based", "--n", 4, "--seed", 3, "-o", tmp_path / "g.json"], capsys)
    g = tmp_path / "g.json"
    cmds = [
        ["validate", g],
        ["solve", g, "--objective", "parity"],
        ["sweep", g, "--eps-list", "1e-2,1e-3", "--samples", 2, "--seed", 4],
        ["perturb", g, "--eps", 0.01, "--seed", 9],
    ]
    for cmd in cmds:
        first = run(cmd, capsys)
        assert first == run(cmd, capsys)


def test_timing_is_opt_in(tmp_path, capsys):
    run(["family", "ratio", "--eps", 0.05, "-o", tmp_path / "r"], capsys)
    _, out, _ = run(["distance", tmp_path / "r" / "G1.json", tmp_path / "r" / "G5.json"], capsys)
    assert "wall_time_s" not in json.loads(out)
    _, out, _ = run(["distance", tmp_path / "r" / "G1.json", tmp_path / "r" / "G5.json", "--timing"], capsys)
    assert "wall_time_s" in json.loads(out)
    assert json.loads(out)["dist_R"] == pytest.approx(4.0)


def test_chain_documents_omit_moves():
    doc = to_document(MarkovChain(("a",), [[1.0]]))
    assert set(doc) == {"kind", "states", "delta"}
    assert doc["delta"] == [{"state": "a", "dist": {"a": 1.0}}]
