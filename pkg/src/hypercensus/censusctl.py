"""Command-line driver: orbit counts, censuses, invariants and reports.

Subcommands

    count         Burnside orbit count of GL_m(F_q) on degree-d forms
    enumerate     orbit representatives and stabilizers to an OCF1 file
    invariants    per-orbit invariants to JSON lines (checkpointed)
    stats         tables and histograms from an invariants file
    compare-k3    match K3 parts against an external list
    isom          decide equivalence of two forms
    feasibility   which censuses are within reach
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import os
import shutil
import sys
import time
import traceback
from collections import Counter
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import ffla, hypergeo, orbital, symspace, zetakit
from .orbital import Filtration, GroupSpec, OrbitRecord
from .symspace import Form

log = logging.getLogger("censusctl")

TASKS = ("stabilizers", "smooth", "lines", "planes", "zeta", "ranks")
RECORD_KEYS = ("rep", "stab_order", "smooth", "n_lines", "n_planes", "disjoint_pair", "counts",
               "weil2", "eps", "height", "rk_alg", "rk_geom", "k3part")
ORBIT_LIMIT = 10 ** 14
UNION_FIND_LIMIT = 2 ** 54
DEFAULT_BATCH = 4096
CHECKPOINT_SECONDS = 30.0


# ---------------------------------------------------------------------------
# jobs

@dataclass
class CensusJob:
    m: int
    d: int
    q: int
    filtration: str = "auto"
    tasks: tuple[str, ...] = ()
    workers: int = 1
    checkpoint: str | None = None
    out: str | None = None
    threshold: int | None = None
    batch: int = DEFAULT_BATCH

    @property
    def field(self) -> ffla.FieldDesc:
        return ffla.field_of_size(self.q)

    @property
    def basis(self) -> symspace.MonomialBasis:
        return symspace.monomials(self.m, self.d)

    def group(self) -> GroupSpec:
        return GroupSpec.gl(self.m, self.field)

    def make_filtration(self, group: GroupSpec | None = None) -> Filtration:
        basis, field = self.basis, self.field
        if self.filtration == "none":
            return Filtration.trivial(basis, field)
        if self.filtration == "auto":
            return Filtration.auto(basis, field, group or self.group())
        filt = Filtration.loads(Path(self.filtration).read_text())
        if filt.basis != basis or filt.field != field:
            raise ValueError(f"{self.filtration}: filtration is for a different space")
        return filt


def apply_threshold(threshold: int | None) -> None:
    if threshold is None:
        return
    orbital.NAIVE_THRESHOLD = threshold
    orbital.FIBER_THRESHOLD = threshold
    zetakit.COUNT_THRESHOLD = threshold
    hypergeo.POINT_THRESHOLD = threshold


# ---------------------------------------------------------------------------
# count

def cmd_count(m: int, d: int, q: int) -> int:
    field = ffla.field_of_size(q)
    return orbital.burnside_count(GroupSpec.gl(m, field), symspace.monomials(m, d))


# ---------------------------------------------------------------------------
# enumerate

_worker_engine: orbital.OrbitEngine | None = None


def _init_worker(m: int, d: int, q: int, filt_text: str, seed: int) -> None:
    global _worker_engine
    field = ffla.field_of_size(q)
    _worker_engine = orbital.OrbitEngine(GroupSpec.gl(m, field), Filtration.loads(filt_text), seed)


def _run_task(task) -> list[OrbitRecord]:
    if isinstance(task, OrbitRecord):
        return [task]
    return _worker_engine.run_task(task)


@dataclass
class EnumerationResult:
    path: str
    records: int
    covered: int
    expected_records: int
    expected_points: int
    seconds: float
    dims: list[int]

    @property
    def ok(self) -> bool:
        return self.records == self.expected_records and self.covered == self.expected_points


def cmd_enumerate(job: CensusJob, seed: int = 0, depth: int = 2) -> EnumerationResult:
    """Write every orbit, in increasing canonical order, to an OCF1 file and certify it.

    Records are appended to ``out.body`` as they finish; the checkpoint holds
    the number of finished work items and the body offset, so a resumed run
    truncates the body and continues with the next item.  Work items are the
    orbits found ``depth`` levels down the filtration.
    """
    if not job.out:
        raise ValueError("enumerate needs --out")
    t0 = time.time()
    group = job.group()
    filt = job.make_filtration(group)
    basis, field = job.basis, job.field
    engine = orbital.OrbitEngine(group, filt, seed)
    packer = orbital.OrbitFileWriter(None, basis, field)
    out = Path(job.out)
    body_path = Path(str(out) + ".body")
    ckpt = Path(job.checkpoint) if job.checkpoint else None
    state = {"tasks": 0, "offset": 0, "records": 0, "covered": 0, "last": -1, "depth": depth,
             "dims": filt.dims, "seed": seed}
    if ckpt and ckpt.exists() and body_path.exists():
        saved_state = json.loads(ckpt.read_text())
        for key in ("depth", "dims", "seed"):
            if saved_state[key] != state[key]:
                raise ValueError(f"checkpoint was written with {key}={saved_state[key]}, not {state[key]}")
        state = saved_state
        log.info("resuming enumeration after %d tasks", state["tasks"])
    n_rec, covered, last = state["records"], state["covered"], state["last"]
    saved = time.time()
    with open(body_path, "r+b" if state["offset"] else "wb") as body:
        body.truncate(state["offset"])
        body.seek(state["offset"])
        pending = (t for i, t in enumerate(engine.iter_tasks(True, depth=depth)) if i >= state["tasks"])
        with _task_runner(job, filt, seed, engine) as run:
            for i, recs in enumerate(run(pending), start=state["tasks"] + 1):
                for rec in recs:
                    if rec.code <= last:
                        raise RuntimeError("orbit codes are not strictly increasing")
                    last = rec.code
                    body.write(packer.pack(rec))
                    n_rec += 1
                    covered += rec.orbit_size
                log.debug("task %d: %d records so far, %.1fs", i, n_rec, time.time() - t0)
                if ckpt and time.time() - saved > CHECKPOINT_SECONDS:
                    saved = time.time()
                    log.info("checkpoint at task %d, %d records", i, n_rec)
                    _save_checkpoint(ckpt, body, dict(state, tasks=i, records=n_rec, covered=covered,
                                                      last=last))
    expected_records = cmd_count(job.m, job.d, job.q)
    result = EnumerationResult(str(out), n_rec, covered, expected_records,
                               field.q ** basis.size, time.time() - t0, filt.dims)
    if not result.ok:
        dump = Path(str(out) + ".diagnostic.json")
        dump.write_text(json.dumps({"records": n_rec, "expected_records": expected_records,
                                    "covered": covered, "expected_points": result.expected_points,
                                    "dims": filt.dims, "stats": vars(engine.stats)}, indent=2))
        raise RuntimeError(f"enumeration certificate failed; see {dump}")
    with open(out, "wb") as fh, open(body_path, "rb") as body:
        fh.write(orbital.header_bytes(basis, field, n_rec))
        shutil.copyfileobj(body, fh, 1 << 22)
    body_path.unlink()
    if ckpt and ckpt.exists():
        ckpt.unlink()
    return result


@contextlib.contextmanager
def _task_runner(job: CensusJob, filt: Filtration, seed: int, engine: orbital.OrbitEngine):
    if job.workers <= 1:
        def run(tasks):
            for t in tasks:
                yield [t] if isinstance(t, OrbitRecord) else engine.run_task(t)
        yield run
        return
    import multiprocessing as mp
    with mp.get_context("spawn").Pool(job.workers, _init_worker,
                                      (job.m, job.d, job.q, filt.dumps(), seed)) as pool:
        yield lambda tasks: pool.imap(_run_task, tasks, chunksize=1)


def _save_checkpoint(path: Path, fh, state: dict) -> None:
    fh.flush()
    os.fsync(fh.fileno())
    state = dict(state, offset=fh.tell())
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as c:
        json.dump(state, c)
        c.flush()
        os.fsync(c.fileno())
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# invariants

def compute_invariants(rep: Form, stab_order: int, tasks: Iterable[str]) -> dict:
    """One JSON record; keys not covered by ``tasks`` stay null."""
    tasks = set(tasks)
    rec = {key: None for key in RECORD_KEYS}
    rec["rep"] = symspace.format_coeff_string(rep)
    if "stabilizers" in tasks:
        rec["stab_order"] = stab_order
    want_zeta = bool(tasks & {"zeta", "ranks"})
    smooth = None
    if "smooth" in tasks or want_zeta:
        smooth = False if rep.is_zero() else hypergeo.is_smooth(rep)
        rec["smooth"] = smooth
    if "lines" in tasks:
        rec["n_lines"] = len(hypergeo.lines_on(rep))
    if "planes" in tasks:
        planes = hypergeo.planes_on(rep)
        rec["n_planes"] = len(planes)
        rec["disjoint_pair"] = hypergeo.disjoint_plane_pairs(planes) > 0
    if want_zeta and smooth:
        z = zetakit.zeta(rep).record()
        rec["counts"] = z["counts"]
        rec["weil2"] = z["weil2"]
        rec["eps"] = z["eps"]
        rec["sign_from"] = z["sign_from"]
        if "weil2_alt" in z:
            rec["weil2_alt"] = z["weil2_alt"]
        if "zeta" in tasks:
            rec["height"] = z["height"]
        if "ranks" in tasks:
            rec["rk_alg"], rec["rk_geom"], rec["k3part"] = z["rk_alg"], z["rk_geom"], z["k3part"]
        if rec["n_lines"] is not None:
            rec["gs_lines"] = zetakit.galkin_shinder_lines(z["counts"][0], z["counts"][1])
    return rec


def _invariant_item(args):
    idx, coeffs, stab, m, d, q, tasks = args
    basis = symspace.monomials(m, d)
    f = Form(basis, ffla.field_of_size(q), tuple(coeffs))
    try:
        rec = compute_invariants(f, stab, tasks)
        rec = {"id": idx, **rec}
        return True, rec
    except Exception as exc:  # quarantined, never dropped
        return False, {"id": idx, "rep": symspace.format_coeff_string(f), "error": repr(exc),
                       "trace": traceback.format_exc(limit=3)}


def cmd_invariants(job: CensusJob, orbit_path: str) -> dict:
    """Invariants for every record of an OCF1 file, one JSON line each."""
    if not job.out:
        raise ValueError("invariants needs --out")
    m, d, q, count = orbital.read_orbit_header(orbit_path)
    if (m, d, q) != (job.m, job.d, job.q):
        raise ValueError(f"{orbit_path} holds ({m},{d},{q}) forms, job expects ({job.m},{job.d},{job.q})")
    tasks = tuple(job.tasks) or ("stabilizers", "smooth")
    bad = set(tasks) - set(TASKS)
    if bad:
        raise ValueError(f"unknown tasks {sorted(bad)}")
    if set(tasks) & {"zeta", "ranks"} and (m, d, q) != (6, 3, 2):
        raise ValueError("zeta and ranks are available for cubic fourfolds over F_2 only")
    out = Path(job.out)
    err_path = Path(str(out) + ".errors.jsonl")
    ckpt = Path(job.checkpoint) if job.checkpoint else None
    start, offset, err_offset = 0, 0, 0
    if ckpt and ckpt.exists() and out.exists():
        state = json.loads(ckpt.read_text())
        start, offset, err_offset = state["index"], state["offset"], state.get("err_offset", 0)
        log.info("resuming invariants at record %d", start)
    fh = open(out, "r+" if offset else "w")
    eh = open(err_path, "r+" if err_offset else "w")
    fh.truncate(offset)
    fh.seek(offset)
    eh.truncate(err_offset)
    eh.seek(err_offset)
    items = ((i, r.representative.coeffs, r.stabilizer_order, m, d, q, tasks)
             for i, r in enumerate(orbital.read_orbit_file(orbit_path)) if i >= start)
    written = errors = 0
    try:
        with _pool(job.workers) as imap:
            for n, (ok, rec) in enumerate(imap(_invariant_item, items), start=start + 1):
                if ok:
                    fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
                    written += 1
                else:
                    eh.write(json.dumps(rec) + "\n")
                    errors += 1
                if ckpt and n % job.batch == 0:
                    eh.flush()
                    os.fsync(eh.fileno())
                    _save_checkpoint(ckpt, fh, {"index": n, "err_offset": eh.tell()})
    finally:
        fh.close()
        eh.close()
    if ckpt and ckpt.exists():
        ckpt.unlink()
    if not errors:
        err_path.unlink()
    return {"records": count, "written": written, "errors": errors, "resumed_at": start}


@contextlib.contextmanager
def _pool(workers: int):
    if workers <= 1:
        yield map
        return
    import multiprocessing as mp
    with mp.get_context("spawn").Pool(workers) as pool:
        yield lambda fn, items: pool.imap(fn, items, chunksize=16)


# ---------------------------------------------------------------------------
# stats

def exact_decimal(x: Fraction, digits: int = 60) -> str:
    """Decimal expansion, exact when it terminates within ``digits`` places."""
    sign = "-" if x < 0 else ""
    x = abs(x)
    whole, rem = divmod(x.numerator, x.denominator)
    out = []
    for _ in range(digits):
        if rem == 0:
            break
        rem *= 10
        dgt, rem = divmod(rem, x.denominator)
        out.append(str(dgt))
    tail = "".join(out)
    text = f"{sign}{whole}" + (f".{tail}" if tail else "")
    return text if rem == 0 else text + "..."


def poonen_limit(n: int, q: int) -> Fraction:
    """prod_{1 <= k <= n} (1 - q^-k), the large-degree smooth proportion in P^n."""
    out = Fraction(1)
    for k in range(1, n + 1):
        out *= 1 - Fraction(1, q ** k)
    return out


@dataclass
class StatReport:
    m: int
    d: int
    q: int
    records: int = 0
    classes: int = 0
    smooth: int | None = None
    trivial_stab: int | None = None
    trivial_stab_smooth: int | None = None
    with_plane: int | None = None
    with_plane_smooth: int | None = None
    disjoint_pair: int | None = None
    disjoint_pair_smooth: int | None = None
    one_line: int | None = None
    one_line_smooth: int | None = None
    stacky_all: Fraction | None = None
    stacky_smooth: Fraction | None = None
    smooth_forms: int | None = None
    smooth_probability: Fraction | None = None
    poonen: Fraction | None = None
    aut_orders: list[int] = dc_field(default_factory=list)
    aut_orders_smooth: list[int] = dc_field(default_factory=list)
    ordinary: int | None = None
    supersingular: int | None = None
    nl_general: int | None = None
    distinct_zeta: int | None = None
    sign_plus: int | None = None
    sign_unresolved: int | None = None
    heights: dict = dc_field(default_factory=dict)
    rk_alg: dict = dc_field(default_factory=dict)
    rk_geom: dict = dc_field(default_factory=dict)
    lines_hist: dict = dc_field(default_factory=dict)
    planes_hist: dict = dc_field(default_factory=dict)
    k3_parts: int | None = None
    gs_mismatch: int | None = None


def iter_jsonl(path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def cmd_stats(path: str, m: int = 6, d: int = 3, q: int = 2) -> StatReport:
    """Aggregate an invariants file; every figure is a count over its records."""
    group_order = ffla.gl_order(m, q)
    n = math.comb(m + d - 1, d)
    rep = StatReport(m, d, q)
    has = Counter()
    stacky_all = Fraction(0)
    stacky_smooth = Fraction(0)
    smooth_forms = 0
    auts, auts_smooth = set(), set()
    heights, rk_alg, rk_geom, lines_hist, planes_hist = Counter(), Counter(), Counter(), Counter(), Counter()
    zetas, k3 = set(), set()
    c = Counter()
    for r in iter_jsonl(path):
        rep.records += 1
        if set(r["rep"]) <= {"0", ","}:
            continue  # the zero form is not a hypersurface
        rep.classes += 1
        smooth = r.get("smooth")
        stab = r.get("stab_order")
        for key in ("smooth", "stab_order", "n_lines", "n_planes", "disjoint_pair", "weil2", "eps", "height",
                    "rk_alg"):
            if r.get(key) is not None:
                has[key] += 1
        if smooth:
            c["smooth"] += 1
        if stab is not None:
            stacky_all += Fraction(1, stab)
            auts.add(stab)
            if stab == 1:
                c["trivial"] += 1
            if smooth:
                stacky_smooth += Fraction(1, stab)
                smooth_forms += group_order // stab
                auts_smooth.add(stab)
                if stab == 1:
                    c["trivial_smooth"] += 1
        if r.get("n_planes") is not None:
            planes_hist[r["n_planes"]] += 1
            if r["n_planes"] > 0:
                c["plane"] += 1
                c["plane_smooth"] += bool(smooth)
            if r.get("disjoint_pair"):
                c["disjoint"] += 1
                c["disjoint_smooth"] += bool(smooth)
        if r.get("n_lines") is not None:
            lines_hist[r["n_lines"]] += 1
            if r["n_lines"] == 1:
                c["one_line"] += 1
                c["one_line_smooth"] += bool(smooth)
            if r.get("gs_lines") is not None and r["gs_lines"] != r["n_lines"]:
                c["gs_mismatch"] += 1
        if smooth and (r.get("weil2") is not None or r.get("weil2_alt")):
            if r.get("eps") is None:
                c["unresolved"] += 1
            else:
                c["plus"] += r["eps"] == 0
                zetas.add(tuple(r["weil2"]))
            if r.get("height") is not None:
                heights[r["height"]] += 1
            if r.get("rk_alg") is not None:
                rk_alg[r["rk_alg"]] += 1
                rk_geom[r["rk_geom"]] += 1
                if r["rk_geom"] == 1:
                    c["nl"] += 1
            if r.get("k3part") is not None:
                k3.add(tuple(r["k3part"]))
    rep.smooth = c["smooth"] if has["smooth"] else None
    if has["stab_order"]:
        rep.trivial_stab = c["trivial"]
        rep.stacky_all = stacky_all
        rep.aut_orders = sorted(auts)
        if has["smooth"]:
            rep.trivial_stab_smooth = c["trivial_smooth"]
            rep.stacky_smooth = stacky_smooth
            rep.smooth_forms = smooth_forms
            rep.smooth_probability = Fraction(smooth_forms, q ** n)
            rep.aut_orders_smooth = sorted(auts_smooth)
    rep.poonen = poonen_limit(m - 1, q)
    if has["n_planes"]:
        rep.with_plane, rep.disjoint_pair = c["plane"], c["disjoint"]
        if has["smooth"]:
            rep.with_plane_smooth, rep.disjoint_pair_smooth = c["plane_smooth"], c["disjoint_smooth"]
        rep.planes_hist = dict(sorted(planes_hist.items()))
    if has["n_lines"]:
        rep.one_line = c["one_line"]
        rep.one_line_smooth = c["one_line_smooth"] if has["smooth"] else None
        rep.lines_hist = dict(sorted(lines_hist.items()))
        rep.gs_mismatch = c["gs_mismatch"]
    if has["weil2"] or c["unresolved"]:
        rep.distinct_zeta = len(zetas)
        rep.sign_plus = c["plus"]
        rep.sign_unresolved = c["unresolved"]
    if has["height"]:
        rep.heights = dict(sorted(heights.items(), key=lambda kv: (kv[0] == "inf", int(kv[0]) if kv[0] != "inf" else 0)))
        rep.ordinary = heights.get("1", 0)
        rep.supersingular = heights.get("inf", 0)
    if has["rk_alg"]:
        rep.rk_alg = dict(sorted(rk_alg.items()))
        rep.rk_geom = dict(sorted(rk_geom.items()))
        rep.nl_general = c["nl"]
        rep.k3_parts = len(k3)
    return rep


def render_report(rep: StatReport) -> str:
    def frac(x: Fraction | None) -> str:
        if x is None:
            return "n/a"
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)

    def val(x) -> str:
        return "n/a" if x is None else str(x)

    def dec(x: Fraction | None) -> str:
        return "n/a" if x is None else exact_decimal(x)

    lines = [f"# Census report: degree {rep.d} forms in {rep.m} variables over F_{rep.q}", "",
             "| quantity | value |", "|---|---|",
             f"| records (zero form included) | {rep.records} |",
             f"| hypersurface classes | {rep.classes} |",
             f"| smooth classes | {val(rep.smooth)} |",
             f"| trivial stabilizer (all / smooth) | {val(rep.trivial_stab)} / {val(rep.trivial_stab_smooth)} |",
             f"| containing a plane (all / smooth) | {val(rep.with_plane)} / {val(rep.with_plane_smooth)} |",
             f"| two disjoint planes (all / smooth) | {val(rep.disjoint_pair)} / {val(rep.disjoint_pair_smooth)} |",
             f"| exactly one line (all / smooth) | {val(rep.one_line)} / {val(rep.one_line_smooth)} |",
             f"| stacky count, all | {frac(rep.stacky_all)} |",
             f"| stacky count, smooth | {frac(rep.stacky_smooth)} |",
             f"| smooth forms | {val(rep.smooth_forms)} |",
             f"| smooth proportion (forms / q^N) | "
             f"{dec(rep.smooth_probability)} |",
             f"| large-degree limit prod(1 - q^-k) | {dec(rep.poonen)} |",
             f"| ordinary / supersingular | {val(rep.ordinary)} / {val(rep.supersingular)} |",
             f"| geometric rank 1 | {val(rep.nl_general)} |",
             f"| distinct zeta functions | {val(rep.distinct_zeta)} |",
             f"| sign +1 / unresolved | {val(rep.sign_plus)} / {val(rep.sign_unresolved)} |",
             f"| distinct K3 parts | {val(rep.k3_parts)} |",
             f"| line-count formula mismatches | {val(rep.gs_mismatch)} |",
             ""]
    if rep.aut_orders:
        lines += [f"Automorphism orders ({len(rep.aut_orders)}): {', '.join(map(str, rep.aut_orders))}", ""]
    if rep.aut_orders_smooth:
        lines += [f"Automorphism orders, smooth ({len(rep.aut_orders_smooth)}): "
                  f"{', '.join(map(str, rep.aut_orders_smooth))}", ""]
    for title, hist in (("Heights", rep.heights), ("Algebraic rank", rep.rk_alg),
                        ("Geometric rank", rep.rk_geom)):
        if hist:
            lines += [f"## {title}", "", "| value | classes |", "|---|---|"]
            lines += [f"| {k} | {v} |" for k, v in hist.items()] + [""]
    return "\n".join(lines)


def write_histograms(rep: StatReport, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, hist in (("heights", rep.heights), ("rk_alg", rep.rk_alg), ("rk_geom", rep.rk_geom),
                       ("lines", rep.lines_hist), ("planes", rep.planes_hist)):
        if not hist:
            continue
        path = directory / f"{name}.csv"
        with open(path, "w") as fh:
            fh.write("value,classes\n")
            for k, v in hist.items():
                fh.write(f"{k},{v}\n")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# K3 parts

def _normalize(coeffs: list[Fraction]) -> tuple[int, ...]:
    """Primitive integer vector with positive leading coefficient."""
    den = math.lcm(*(c.denominator for c in coeffs))
    ints = [int(c * den) for c in coeffs]
    g = math.gcd(*ints)
    ints = [x // g for x in ints]
    if ints[-1] < 0:
        ints = [-x for x in ints]
    return tuple(ints)


def parse_polynomial_list(path, untwisted: int | None = None) -> tuple[set, list[tuple[int, str]]]:
    """External list: one polynomial per line, integer coefficients ascending."""
    polys, bad = set(), []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                coeffs = [Fraction(int(tok)) for tok in text.replace(",", " ").split()]
            except ValueError:
                bad.append((lineno, text))
                continue
            if len(coeffs) < 2 or coeffs[-1] == 0:
                bad.append((lineno, text))
                continue
            if untwisted:
                deg = len(coeffs) - 1
                coeffs = [c * Fraction(untwisted) ** (i - deg) for i, c in enumerate(coeffs)]
            polys.add(_normalize(coeffs))
    return polys, bad


def our_k3_parts(path) -> set:
    out = set()
    for r in iter_jsonl(path):
        if r.get("k3part"):
            out.add(_normalize([Fraction(c) for c in r["k3part"]]))
    return out


def cmd_compare_k3(ours_path: str, external_path: str, untwisted: int | None = None) -> dict:
    """Distinct K3 parts of an invariants file found in an external list."""
    ours = our_k3_parts(ours_path)
    theirs, bad = parse_polynomial_list(external_path, untwisted)
    matched = ours & theirs
    return {"ours": len(ours), "external": len(theirs), "matches": len(matched),
            "missing": sorted(ours - theirs), "malformed": bad}


# ---------------------------------------------------------------------------
# isomorphism

def read_form(path: str, m: int, d: int, q: int) -> Form:
    text = Path(path).read_text().strip()
    return symspace.parse_form(text, symspace.monomials(m, d), ffla.field_of_size(q))


def cmd_isom(f1: Form, f2: Form, filtration: str = "auto") -> np.ndarray | None:
    """A verified transporter g with act(g, f1) = f2, or None."""
    job = CensusJob(f1.m, f1.d, f1.field.q, filtration)
    group = job.group()
    g = orbital.is_equivalent(f1, f2, job.make_filtration(group), group)
    if g is not None and symspace.act(g, f1) != f2:
        raise AssertionError("transporter failed verification")
    return g


# ---------------------------------------------------------------------------
# feasibility

def orbit_count_estimate(m: int, d: int, q: int, exact_limit: int = 4096) -> tuple[Fraction, bool]:
    """Burnside count when cheap, otherwise the leading term q^N / |GL|."""
    n = math.comb(m + d - 1, d)
    if q ** m <= exact_limit and n <= 400:
        return Fraction(cmd_count(m, d, q)), True
    return Fraction(q ** n, ffla.gl_order(m, q)), False


def too_many_orbits(m: int, d: int, q: int, margin: int = 1000) -> bool:
    """Whether the orbit count exceeds ORBIT_LIMIT.

    The identity term q^N / |GL| is a lower bound for the count, so it settles
    the question above the limit.  Within ``margin`` below it, Burnside decides.
    """
    n = math.comb(m + d - 1, d)
    lead = Fraction(q ** n, ffla.gl_order(m, q))
    if lead > ORBIT_LIMIT:
        return True
    if lead * margin > ORBIT_LIMIT:
        count, _ = orbit_count_estimate(m, d, q)
        return count > ORBIT_LIMIT
    return False


def feasibility_cell(n: int, d: int, q: int) -> str:
    """'X' for too many orbits, else '<union-find>|<filtration>' with Y/N each."""
    m = n + 2
    size = q ** math.comb(m + d - 1, d)
    if size > ORBIT_LIMIT and too_many_orbits(m, d, q):
        return "X"
    left = "Y" if size <= UNION_FIND_LIMIT else "N"
    p = ffla.field_of_size(q).p
    right = "Y" if left == "Y" or p <= d else "N"
    return f"{left}|{right}"


def cmd_feasibility(q: int, max_n: int | None = None, max_d: int | None = None) -> list[list[str]]:
    """Rows n = 0..max_n (hypersurface dimension), columns d = 2..max_d."""
    if max_d is None:
        max_d = 2
        while feasibility_cell(0, max_d, q) != "X":
            max_d += 1
    if max_n is None:
        max_n = 8
    return [[feasibility_cell(n, d, q) for d in range(2, max_d + 1)] for n in range(max_n + 1)]


def render_feasibility(table: list[list[str]], q: int) -> str:
    ncols = len(table[0])
    head = "| n \\ d | " + " | ".join(str(d) for d in range(2, ncols + 2)) + " |"
    rule = "|---" * (ncols + 1) + "|"
    body = [f"| {n} | " + " | ".join(row) + " |" for n, row in enumerate(table)]
    return "\n".join([f"Feasibility over F_{q} (X: too many orbits; left: union-find, right: filtration)",
                      "", head, rule] + body)


# ---------------------------------------------------------------------------
# command line

def _space_args(p: argparse.ArgumentParser, m=6, d=3, q=2) -> None:
    p.add_argument("--vars", type=int, default=m, help="number of variables m")
    p.add_argument("--deg", type=int, default=d, help="degree d")
    p.add_argument("--q", type=int, default=q, help="field size")


def _job_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--filtration", default="auto", help="auto, none, or a filtration file")
    p.add_argument("--tasks", default="", help=f"comma separated, from {','.join(TASKS)}")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--threshold", type=int, default=None, help="size guard for brute-force oracles")
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH, help="records between checkpoints")


def _job(args) -> CensusJob:
    tasks = tuple(t for t in args.tasks.split(",") if t)
    return CensusJob(args.vars, args.deg, args.q, args.filtration, tasks, args.workers,
                     args.checkpoint, args.out, args.threshold, args.batch)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="censusctl", description="Hypersurface censuses over small finite fields.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("count", help="Burnside orbit count")
    _space_args(p)

    p = sub.add_parser("enumerate", help="orbit representatives to an OCF1 file")
    _space_args(p)
    _job_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-depth", type=int, default=2, help="filtration levels expanded before handing out work")

    p = sub.add_parser("invariants", help="per-orbit invariants as JSON lines")
    _space_args(p)
    _job_args(p)
    p.add_argument("orbits", help="OCF1 file")

    p = sub.add_parser("stats", help="report from an invariants file")
    _space_args(p)
    p.add_argument("invariants")
    p.add_argument("--out", default=None, help="markdown report path (default stdout)")
    p.add_argument("--csv-dir", default=None, help="directory for histogram CSV files")

    p = sub.add_parser("compare-k3", help="match K3 parts against an external list")
    p.add_argument("invariants")
    p.add_argument("external")
    p.add_argument("--untwisted", type=int, default=None,
                   help="external roots have absolute value UNTWISTED; rescale to the unit circle")
    p.add_argument("--missing", default=None, help="write our unmatched K3 parts here")

    p = sub.add_parser("isom", help="decide equivalence of two forms")
    _space_args(p)
    p.add_argument("--filtration", default="auto")
    p.add_argument("form1")
    p.add_argument("form2")

    p = sub.add_parser("feasibility", help="feasibility table")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--max-n", type=int, default=None)
    p.add_argument("--max-d", type=int, default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    if args.cmd == "count":
        print(cmd_count(args.vars, args.deg, args.q))
    elif args.cmd == "enumerate":
        apply_threshold(args.threshold)
        res = cmd_enumerate(_job(args), seed=args.seed, depth=args.split_depth)
        print(f"records {res.records} (expected {res.expected_records}); "
              f"points {res.covered} (expected {res.expected_points}); "
              f"filtration {res.dims}; {res.seconds:.1f}s -> {res.path}")
    elif args.cmd == "invariants":
        apply_threshold(args.threshold)
        res = cmd_invariants(_job(args), args.orbits)
        print(json.dumps(res))
        return 1 if res["errors"] else 0
    elif args.cmd == "stats":
        rep = cmd_stats(args.invariants, args.vars, args.deg, args.q)
        text = render_report(rep)
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        if args.csv_dir:
            write_histograms(rep, Path(args.csv_dir))
    elif args.cmd == "compare-k3":
        res = cmd_compare_k3(args.invariants, args.external, args.untwisted)
        for lineno, text in res["malformed"]:
            print(f"{args.external}:{lineno}: malformed line: {text[:60]}", file=sys.stderr)
        print(f"matches {res['matches']} of {res['ours']} distinct K3 parts "
              f"({res['external']} external polynomials)")
        if args.missing:
            with open(args.missing, "w") as fh:
                for poly in res["missing"]:
                    fh.write(" ".join(map(str, poly)) + "\n")
    elif args.cmd == "isom":
        f1 = read_form(args.form1, args.vars, args.deg, args.q)
        f2 = read_form(args.form2, args.vars, args.deg, args.q)
        g = cmd_isom(f1, f2, args.filtration)
        if g is None:
            print("not equivalent")
            return 1
        print("equivalent; act(g, form1) = form2 with g =")
        for row in g:
            print(" ".join(str(int(x)) for x in row))
    elif args.cmd == "feasibility":
        print(render_feasibility(cmd_feasibility(args.q, args.max_n, args.max_d), args.q))
    return 0


if __name__ == "__main__":
    sys.exit(main())
