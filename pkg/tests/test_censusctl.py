"""Command-line driver: enumeration, invariants, statistics and tables."""

import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import FERMAT_TEXT, X1_TEXT
from hypercensus import censusctl, ffla, hypergeo, orbital, symspace
from hypercensus.censusctl import CensusJob


def enumerate_to(tmp_path, name, m, d, q, **kw):
    depth = kw.pop("depth", 2)
    job = CensusJob(m, d, q, out=str(tmp_path / name), **kw)
    res = censusctl.cmd_enumerate(job, depth=depth)
    return res, (tmp_path / name).read_bytes()


# ---------------------------------------------------------------------------
# count and enumerate

@pytest.mark.parametrize("m,d,q,expected", [(3, 3, 2, 22), (4, 2, 2, 7), (3, 2, 3, 7)])
def test_count_cli(capsys, m, d, q, expected):
    assert censusctl.main(["count", "--vars", str(m), "--deg", str(d), "--q", str(q)]) == 0
    assert int(capsys.readouterr().out) == expected


def test_enumerate_certified(tmp_path):
    res, raw = enumerate_to(tmp_path, "c.ocf", 4, 3, 2)
    assert res.ok and res.records == 142 and res.covered == 2 ** 20
    recs = list(orbital.read_orbit_file(tmp_path / "c.ocf"))
    assert len(recs) == 142
    assert sum(r.orbit_size for r in recs) == 2 ** 20
    assert not (tmp_path / "c.ocf.body").exists()


def test_enumerate_independent_of_workers_and_depth(tmp_path):
    _, serial = enumerate_to(tmp_path, "a.ocf", 4, 3, 2, depth=1)
    _, deep = enumerate_to(tmp_path, "b.ocf", 4, 3, 2, depth=3)
    _, pooled = enumerate_to(tmp_path, "c.ocf", 4, 3, 2, workers=2)
    assert serial == deep == pooled


def test_enumerate_resume(tmp_path, monkeypatch):
    _, straight = enumerate_to(tmp_path, "straight.ocf", 4, 3, 2)
    calls = {"n": 0}
    real = orbital.OrbitEngine.run_task

    def flaky(self, task):
        calls["n"] += 1
        if calls["n"] == 3:
            raise KeyboardInterrupt
        return real(self, task)

    monkeypatch.setattr(censusctl, "CHECKPOINT_SECONDS", -1.0)
    monkeypatch.setattr(orbital.OrbitEngine, "run_task", flaky)
    job = CensusJob(4, 3, 2, out=str(tmp_path / "r.ocf"), checkpoint=str(tmp_path / "r.ckpt"))
    with pytest.raises(KeyboardInterrupt):
        censusctl.cmd_enumerate(job)
    state = json.loads((tmp_path / "r.ckpt").read_text())
    assert state["tasks"] >= 1 and state["offset"] > 0
    monkeypatch.setattr(orbital.OrbitEngine, "run_task", real)
    res = censusctl.cmd_enumerate(job)
    assert res.ok
    assert (tmp_path / "r.ocf").read_bytes() == straight
    assert not (tmp_path / "r.ckpt").exists()


def test_enumerate_rejects_foreign_checkpoint(tmp_path):
    job = CensusJob(3, 3, 2, out=str(tmp_path / "x.ocf"), checkpoint=str(tmp_path / "x.ckpt"))
    (tmp_path / "x.ocf.body").write_bytes(b"")
    (tmp_path / "x.ckpt").write_text(json.dumps({"tasks": 1, "offset": 0, "records": 0, "covered": 0,
                                                 "last": -1, "depth": 5, "dims": [], "seed": 0}))
    with pytest.raises(ValueError, match="depth"):
        censusctl.cmd_enumerate(job)


def test_enumerate_certificate_failure(tmp_path, monkeypatch):
    monkeypatch.setattr(censusctl, "cmd_count", lambda m, d, q: 23)
    job = CensusJob(3, 3, 2, out=str(tmp_path / "bad.ocf"))
    with pytest.raises(RuntimeError, match="certificate"):
        censusctl.cmd_enumerate(job)
    diag = json.loads((tmp_path / "bad.ocf.diagnostic.json").read_text())
    assert diag["records"] == 22 and diag["expected_records"] == 23


# ---------------------------------------------------------------------------
# invariants and statistics

@pytest.fixture(scope="module")
def plane_cubics(tmp_path_factory):
    path = tmp_path_factory.mktemp("pc") / "pc.ocf"
    censusctl.cmd_enumerate(CensusJob(3, 3, 2, out=str(path)))
    return path


def test_invariants_and_stacky_sum(tmp_path, plane_cubics):
    job = CensusJob(3, 3, 2, tasks=("stabilizers", "smooth"), out=str(tmp_path / "inv.jsonl"))
    res = censusctl.cmd_invariants(job, str(plane_cubics))
    assert res == {"records": 22, "written": 22, "errors": 0, "resumed_at": 0}
    rows = list(censusctl.iter_jsonl(tmp_path / "inv.jsonl"))
    assert [r["id"] for r in rows] == list(range(22))
    rep = censusctl.cmd_stats(str(tmp_path / "inv.jsonl"), 3, 3, 2)
    assert rep.records == 22 and rep.classes == 21
    assert rep.stacky_all == Fraction(2 ** 10 - 1, 168)
    # smooth plane cubics over F_2, counted as forms
    smooth = sum(1 for a in np.ndindex(*[2] * 10)
                 if any(a) and is_smooth_plane_cubic(np.array(a)))
    assert rep.smooth_forms == smooth
    text = censusctl.render_report(rep)
    assert "| hypersurface classes | 21 |" in text
    assert "| stacky count, all | 341/56 |" in text


def is_smooth_plane_cubic(arr):
    f = symspace.Form.from_array(symspace.monomials(3, 3), ffla.field_of_size(2), arr)
    return hypergeo.is_smooth(f)


def test_invariants_quarantine(tmp_path, plane_cubics, monkeypatch):
    real = censusctl.compute_invariants

    def picky(rep, stab, tasks):
        if rep.coeffs.count(1) == 1:
            raise ValueError("boom")
        return real(rep, stab, tasks)

    monkeypatch.setattr(censusctl, "compute_invariants", picky)
    job = CensusJob(3, 3, 2, tasks=("stabilizers",), out=str(tmp_path / "q.jsonl"))
    res = censusctl.cmd_invariants(job, str(plane_cubics))
    errs = list(censusctl.iter_jsonl(tmp_path / "q.jsonl.errors.jsonl"))
    assert res["errors"] == len(errs) >= 1
    assert res["written"] + res["errors"] == 22
    assert all("boom" in e["error"] for e in errs)


def test_invariants_resume(tmp_path, plane_cubics, monkeypatch):
    straight = CensusJob(3, 3, 2, tasks=("stabilizers", "smooth"), out=str(tmp_path / "s.jsonl"))
    censusctl.cmd_invariants(straight, str(plane_cubics))
    real = censusctl.compute_invariants
    calls = {"n": 0}

    def flaky(rep, stab, tasks):
        calls["n"] += 1
        if calls["n"] == 10:
            raise KeyboardInterrupt
        return real(rep, stab, tasks)

    monkeypatch.setattr(censusctl, "compute_invariants", flaky)
    job = CensusJob(3, 3, 2, tasks=("stabilizers", "smooth"), out=str(tmp_path / "r.jsonl"),
                    checkpoint=str(tmp_path / "r.ckpt"), batch=4)
    with pytest.raises(KeyboardInterrupt):
        censusctl.cmd_invariants(job, str(plane_cubics))
    monkeypatch.setattr(censusctl, "compute_invariants", real)
    res = censusctl.cmd_invariants(job, str(plane_cubics))
    assert res["resumed_at"] == 8
    assert (tmp_path / "r.jsonl").read_text() == (tmp_path / "s.jsonl").read_text()


def test_invariants_rejects_other_space(tmp_path, plane_cubics):
    job = CensusJob(6, 3, 2, out=str(tmp_path / "x.jsonl"))
    with pytest.raises(ValueError):
        censusctl.cmd_invariants(job, str(plane_cubics))
    job = CensusJob(3, 3, 2, tasks=("zeta",), out=str(tmp_path / "x.jsonl"))
    with pytest.raises(ValueError, match="cubic fourfolds"):
        censusctl.cmd_invariants(job, str(plane_cubics))


@pytest.fixture(scope="module")
def fourfold_sample(tmp_path_factory):
    """X1, Fermat, x0^3 and the zero form with every invariant."""
    F, B = ffla.field_of_size(2), symspace.monomials(6, 3)
    forms = [(symspace.parse_poly(X1_TEXT, B, F), 1451520),
             (symspace.parse_poly(FERMAT_TEXT, B, F), 23040),
             (symspace.parse_poly("x0^3", B, F), 319979520),
             (symspace.Form.zero(B, F), ffla.gl_order(6, 2))]
    d = tmp_path_factory.mktemp("ff")
    recs = [orbital.OrbitRecord(f, [], s, ffla.gl_order(6, 2) // s) for f, s in forms]
    orbital.write_orbit_file(d / "s.ocf", recs, B, F)
    job = CensusJob(6, 3, 2, tasks=censusctl.TASKS, out=str(d / "s.jsonl"))
    censusctl.cmd_invariants(job, str(d / "s.ocf"))
    return d / "s.jsonl"


def test_fourfold_records(fourfold_sample):
    x1, fermat, cone, zero = censusctl.iter_jsonl(fourfold_sample)
    for r in (x1, fermat, cone, zero):
        assert set(censusctl.RECORD_KEYS) <= set(r)
    assert x1["smooth"] and fermat["smooth"]
    assert not cone["smooth"] and not zero["smooth"]
    assert x1["n_lines"] == x1["gs_lines"] == 315
    assert fermat["n_lines"] == fermat["gs_lines"] == 75
    assert x1["counts"][:3] == [63, 693, 5193]
    assert fermat["counts"][:2] == [31, 693]
    assert x1["height"] == fermat["height"] == "inf"
    assert x1["rk_alg"] == 16 and x1["rk_geom"] == 23
    assert len(x1["weil2"]) == 23 and len(x1["k3part"]) == 22
    assert cone["counts"] is None and cone["weil2"] is None


def test_fourfold_stats(fourfold_sample):
    rep = censusctl.cmd_stats(str(fourfold_sample))
    assert rep.records == 4 and rep.classes == 3
    assert rep.smooth == 2 and rep.supersingular == 2
    assert rep.stacky_all == Fraction(1, 1451520) + Fraction(1, 23040) + Fraction(1, 319979520)
    assert rep.smooth_forms == ffla.gl_order(6, 2) // 1451520 + ffla.gl_order(6, 2) // 23040
    assert rep.gs_mismatch == 0
    assert rep.poonen == Fraction(9765, 32768)


def test_render_empty_report():
    assert "n/a" in censusctl.render_report(censusctl.StatReport(3, 3, 2))


def test_exact_decimal_digits():
    u = 21138040038850560
    assert censusctl.exact_decimal(Fraction(u, 2 ** 56)) == "0.29334923433225412736646831035614013671875"
    assert censusctl.exact_decimal(censusctl.poonen_limit(5, 2)) == "0.298004150390625"
    assert censusctl.exact_decimal(Fraction(1, 3), 5) == "0.33333..."


# ---------------------------------------------------------------------------
# K3 comparison and isomorphism

def test_compare_k3(tmp_path, fourfold_sample):
    ours = censusctl.our_k3_parts(fourfold_sample)
    assert len(ours) == 2
    ext = tmp_path / "ext.txt"
    lines = ["# header", ""] + [" ".join(str(-c) for c in p) for p in ours] + ["1 2 x", "0"]
    ext.write_text("\n".join(lines) + "\n")
    res = censusctl.cmd_compare_k3(str(fourfold_sample), str(ext))
    assert res["matches"] == 2 and res["missing"] == []
    assert [n for n, _ in res["malformed"]] == [5, 6]
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    res = censusctl.cmd_compare_k3(str(fourfold_sample), str(empty))
    assert res["matches"] == 0 and len(res["missing"]) == 2


def test_compare_k3_untwisted(tmp_path, fourfold_sample):
    ours = sorted(censusctl.our_k3_parts(fourfold_sample))
    ext = tmp_path / "ext.txt"
    # roots scaled to absolute value 2: coefficient i picks up 2^(deg - i)
    rows = []
    for p in ours:
        deg = len(p) - 1
        rows.append(" ".join(str(c * 2 ** (deg - i)) for i, c in enumerate(p)))
    ext.write_text("\n".join(rows) + "\n")
    assert censusctl.cmd_compare_k3(str(fourfold_sample), str(ext), untwisted=2)["matches"] == 2
    assert censusctl.cmd_compare_k3(str(fourfold_sample), str(ext))["matches"] == 0


def test_isom_cli(tmp_path, capsys):
    (tmp_path / "a").write_text("x0^3\n")
    (tmp_path / "b").write_text("x5^3\n")
    (tmp_path / "c").write_text(X1_TEXT + "\n")
    (tmp_path / "e").write_text(FERMAT_TEXT + "\n")
    assert censusctl.main(["isom", str(tmp_path / "a"), str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out.splitlines()
    g = np.array([[int(x) for x in row.split()] for row in out[1:]])
    F, B = ffla.field_of_size(2), symspace.monomials(6, 3)
    f1 = symspace.parse_poly("x0^3", B, F)
    assert symspace.act(g, f1) == symspace.parse_poly("x5^3", B, F)
    assert censusctl.main(["isom", str(tmp_path / "c"), str(tmp_path / "e")]) == 1
    assert "not equivalent" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# feasibility

TABLES = {
    2: """Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y
          Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y X
          Y|Y Y|Y Y|Y N|Y X X X X
          Y|Y Y|Y X X X X X X
          Y|Y N|Y X X X X X X
          Y|Y N|Y X X X X X X
          Y|Y X X X X X X X
          Y|Y X X X X X X X
          N|Y X X X X X X X""",
    3: """Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y
          Y|Y Y|Y Y|Y Y|Y Y|Y N|Y X X
          Y|Y Y|Y N|Y X X X X X
          Y|Y N|Y X X X X X X
          Y|Y N|Y X X X X X X
          Y|Y X X X X X X X
          N|N X X X X X X X""",
    5: """Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y Y|Y
          Y|Y Y|Y Y|Y Y|Y N|Y X X X
          Y|Y Y|Y X X X X X X
          Y|Y N|N X X X X X X
          Y|Y X X X X X X X
          N|N X X X X X X X""",
}


@pytest.mark.parametrize("q", [2, 3, 5])
def test_feasibility_tables(q):
    want = [row.split() for row in TABLES[q].splitlines()]
    assert censusctl.cmd_feasibility(q, len(want) - 1, 9) == want


@pytest.mark.parametrize("n,d,q,cell", [
    (0, 48, 2, "Y|Y"), (0, 49, 2, "X"), (0, 31, 3, "Y|Y"), (0, 32, 3, "X"),
    (0, 22, 5, "Y|Y"), (0, 23, 5, "X"), (20, 2, 2, "N|Y"), (20, 3, 2, "X"),
])
def test_feasibility_edges(n, d, q, cell):
    assert censusctl.feasibility_cell(n, d, q) == cell


def test_feasibility_lower_bound():
    # the identity term never exceeds the exact count
    for m, d, q in [(3, 3, 2), (4, 3, 2), (3, 4, 3), (5, 2, 2)]:
        lead = Fraction(q ** symspace.monomials(m, d).size, ffla.gl_order(m, q))
        assert lead <= censusctl.cmd_count(m, d, q)


def test_feasibility_cli(capsys):
    assert censusctl.main(["feasibility", "--q", "2", "--max-n", "2", "--max-d", "5"]) == 0
    out = capsys.readouterr().out
    assert "| 2 | Y|Y | Y|Y | Y|Y | N|Y |" in out
