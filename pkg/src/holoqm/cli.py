"""Command-line experiment runner.

Each subcommand reads an optional configuration file, runs one experiment
and writes CSV tables, a JSON summary and ``manifest.json`` into the output
directory.  The manifest is written even when the run fails.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from holoqm import __version__, free_qm
from holoqm.config import (
    ConfigError,
    ExperimentConfig,
    build_form,
    check_generator_file,
    config_target,
    load_config,
    rng_stream,
)
from holoqm.connection import IntegrationError, class_paths, line_integral, stokes_integral
from holoqm.hyp2 import GeodesicTriangle, Moebius, triangle_area, triangle_area_by_quadrature
from holoqm.lie_targets import HEISENBERG_COVERING_RADIUS, SU2, Abelian, Heisenberg, is_lattice_point
from holoqm.quasimorphism import (
    BG,
    HBG,
    QuasimorphismEngine,
    bound_estimate,
    kazhdan_pairs,
    kazhdan_scaling,
    nonconstructible_lab,
    random_pairs,
    ulam_defect,
)
from holoqm.reports import Run
from holoqm.surface_group import Leg, LiftedPoint, random_word, reduce

DEFAULT_WORDS = ("a", "b", "ab", "abAB", "aBcD", "acAC", "aacc", "dacb")


def _engine(cfg: ExperimentConfig, run: Run, default_target: str = "su2") -> QuasimorphismEngine:
    with run.stage("build"):
        check_generator_file(cfg)
        target = config_target(cfg, default_target)
        form = build_form(cfg, target, rng_stream(cfg.seed, "atoms"))
        mode = cfg.get_str("mode", BG).upper()
        if mode not in (BG, HBG):
            cfg._fail("mode", f"expected BG or HBG, got {mode!r}")
    return QuasimorphismEngine(form, mode, cfg.tol, cfg.threads)


def _entries(target, g) -> list[float]:
    g = np.asarray(g)
    if np.iscomplexobj(g):
        return [float(v) for c in g.ravel() for v in (c.real, c.imag)]
    return [float(v) for v in g.ravel()]


def _entry_names(target) -> list[str]:
    if isinstance(target, SU2):
        return [f"g{i}{j}_{p}" for i in range(2) for j in range(2) for p in ("re", "im")]
    if isinstance(target, Heisenberg):
        return [f"g{i}{j}" for i in range(3) for j in range(3)]
    return [f"v{k}" for k in range(target.dim)]


def _values(e: QuasimorphismEngine, words) -> list[np.ndarray]:
    out = []
    for w in words:
        try:
            out.append(e(w))
        except IntegrationError as exc:
            raise IntegrationError(f"word {w!r}: {exc}") from None
    return out


# ---------------------------------------------------------------- holonomy


def cmd_holonomy(cfg: ExperimentConfig, run: Run) -> dict:
    e = _engine(cfg, run)
    tg = e.target
    words = cfg.get_words("words", DEFAULT_WORDS)
    with run.stage("values"):
        vals = _values(e, words)
    oracle = isinstance(tg, Abelian)
    rows = []
    worst = 0.0
    with run.stage("oracle" if oracle else "report"):
        for w, v in zip(words, vals):
            row = {"word": w or "1", "mode": e.mode, "distance_to_identity": tg.distance(v, tg.identity())}
            row.update(zip(_entry_names(tg), _entries(tg, v)))
            if oracle:
                q = _abelian_oracle(e, w)
                row.update({f"oracle{k}": float(x) for k, x in enumerate(q)})
                row["oracle_error"] = float(np.max(np.abs(q - v))) if tg.dim else 0.0
                worst = max(worst, row["oracle_error"])
            rows.append(row)
    header = ["word", "mode", "distance_to_identity"] + _entry_names(tg)
    if oracle:
        header += [f"oracle{k}" for k in range(tg.dim)] + ["oracle_error"]
    run.csv("holonomy.csv", header, rows)
    summary = {"words": len(words), "target": tg.name, "mode": e.mode, "trivial_connection": e.form.is_empty}
    if oracle:
        summary.update({"max_oracle_error": worst, "oracle_ok": worst <= cfg.report_tol})
    run.json("summary.json", summary)
    return summary


def _abelian_oracle(e: QuasimorphismEngine, w: str) -> np.ndarray:
    """Independent quadrature of ``-int theta`` for the BG or HBG value of ``w``."""
    form = e.form
    if not w:
        return np.zeros(form.target.dim)
    if e.mode == BG:
        return line_integral(form, Leg(LiftedPoint("", 0j), LiftedPoint(w, 0j), form.rep))
    cls = form.rep.conj_class_data(w)
    # abelian conjugation is trivial, so q(w) = m * (loop integral)
    return cls.sign * cls.exponent * line_integral(form, cls.geometry.loop())


# ---------------------------------------------------------------- defect scan


def cmd_defect_scan(cfg: ExperimentConfig, run: Run) -> dict:
    e = _engine(cfg, run)
    tg = e.target
    lo = cfg.get_int("min_length", 2, minimum=1)
    hi = cfg.get_int("max_length", 10, minimum=lo)
    count = cfg.get_int("count", 56, minimum=1)
    with run.stage("pairs"):
        pairs = random_pairs(rng_stream(cfg.seed, "pairs"), range(lo, hi + 1), count)
    with run.stage("bound"):
        bound = bound_estimate(e.form)[1] if not e.form.is_empty else 0.0
    with run.stage("defects"):
        words = sorted({w for x, y in pairs for w in (x, y, reduce(x + y))})
        e.values(words)
        rep = ulam_defect(
            e,
            pairs,
            seed=int(rng_stream(cfg.seed, "conjugators").integers(2**31)),
            n_conj=cfg.get_int("conjugators", 8, minimum=1),
            bound=bound,
            n_boot=cfg.get_int("bootstrap", 1000, minimum=10),
        )
    header = ["x", "y", "length", "ulam", "geometric"]
    stokes_max = cfg.get_int("stokes_max_length", 6, minimum=0)
    if isinstance(tg, Abelian):
        header += ["stokes", "stokes_error"]
        with run.stage("stokes"):
            for r in rep.rows:
                xy = reduce(r["x"] + r["y"])
                if max(len(r["x"]), len(r["y"]), len(xy)) > stokes_max or not all(a.kind == "ball" for a in e.form.atoms):
                    continue
                s = _stokes_defect(e, r["x"], r["y"])
                signed = e(r["x"]) + e(r["y"]) - e(xy)
                r["stokes"] = float(np.linalg.norm(s))
                r["stokes_error"] = float(np.max(np.abs(s - signed)))
    run.csv("defects.csv", header, rep.rows)
    run.csv("per_length.csv", ["length", "max_ulam"], sorted(rep.per_length.items()))
    summary = rep.summary()
    summary["target"] = tg.name
    summary["mode"] = e.mode
    summary["within_twice_bound"] = rep.max_ulam_defect <= 2 * bound
    errs = [r["stokes_error"] for r in rep.rows if "stokes_error" in r]
    if errs:
        summary["stokes_checked"] = len(errs)
        summary["max_stokes_error"] = max(errs)
    run.json("summary.json", summary)
    return summary


def _stokes_defect(e: QuasimorphismEngine, x: str, y: str) -> np.ndarray:
    """``q(x) + q(y) - q(xy)`` for abelian BG as ``-int_T d(theta)`` over the triangle ``0, x0, xy0``."""
    rep = e.form.rep
    v = [0j, complex(rep.rep_matrix(x)(0j)), complex(rep.rep_matrix(reduce(x + y))(0j))]
    orient = ((v[1] - v[0]).conjugate() * (v[2] - v[0])).imag
    if abs(orient) < 1e-300 or GeodesicTriangle(*v).is_degenerate:
        return np.zeros(e.target.dim)
    return -math.copysign(1.0, orient) * stokes_integral(e.form, v)


# ---------------------------------------------------------------- hbg


def cmd_hbg(cfg: ExperimentConfig, run: Run) -> dict:
    e = _engine(cfg, run)
    if e.mode != HBG:
        e = QuasimorphismEngine(e.form, HBG, cfg.tol, cfg.threads)
    tg = e.target
    words = [w for w in cfg.get_words("words", DEFAULT_WORDS) if w]
    nmax = cfg.get_int("max_power", 8, minimum=1)
    rows = []
    with run.stage("values"):
        for w in words:
            q = _values(e, [w])[0]
            for n in range(1, nmax + 1):
                qn = e(reduce(w * n))
                assembled = e.hbg_power(w, n)
                rows.append(
                    {
                        "word": w,
                        "n": n,
                        "bitwise_equal": bool(np.array_equal(qn, assembled)),
                        "matrix_power_distance": tg.distance(qn, tg.power(q, n)),
                    }
                )
    run.csv("homogeneity.csv", ["word", "n", "bitwise_equal", "matrix_power_distance"], rows)
    summary = {
        "words": len(words),
        "max_power": nmax,
        "all_bitwise_equal": all(r["bitwise_equal"] for r in rows),
        "max_matrix_power_distance": max((r["matrix_power_distance"] for r in rows), default=0.0),
    }
    run.json("summary.json", summary)
    return summary


# ---------------------------------------------------------------- kazhdan


def cmd_kazhdan(cfg: ExperimentConfig, run: Run) -> dict:
    with run.stage("build"):
        tg = config_target(cfg, "su2")
        gens = cfg.get_words("free_generators", ("a", "b", "c", "d"))
        b = cfg.get_words("b", ("acAC",))
        if len(b) != 1 or not b[0]:
            cfg._fail("b", "expected one nontrivial word")
        b = b[0]
        default_g = [0.0, 0.0, 0.45 * 4 * math.pi] if isinstance(tg, SU2) else [0.5] * tg.dim
        u = cfg.get_vector("g", default_g)
        if len(u) != tg.dim:
            cfg._fail("g", f"needs {tg.dim} numbers")
        g = tg.exp(u)
        if tg.distance(g, tg.identity()) < 1e-12:
            cfg._fail("g", "g = identity gives no obstruction")
        rng = rng_stream(cfg.seed, "pairs")
        lengths = [int(t) for t in cfg.get_str("pair_lengths", "2 3 4").split()]
        pairs, family = kazhdan_pairs(rng, cfg.get_int("pair_max_length", 1, minimum=0), lengths, cfg.get_int("pair_count", 8, minimum=0))
    with run.stage("scaling"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = kazhdan_scaling(
            gens,
            b,
            g,
            cfg.get_int("m0", 8, minimum=1),
            tg,
            pairs,
            family,
            doublings=cfg.get_int("doublings", 3, minimum=1),
            tol=min(cfg.tol, 1e-10),
            margin=cfg.get_float("margin", 0.05),
            tube_length=cfg.get_float("tube_length", 0.6),
            tube_radius=cfg.get_float("tube_radius", 0.08),
        )
    rows = report.scaling
    run.csv("scaling.csv", ["m", "epsilon", "ratio", "b_power_check", "generator_values_distance"], rows)
    summary = report.summary()
    summary["target"] = tg.name
    ratios = [r["ratio"] for r in rows if "ratio" in r]
    summary["ratios_in_band"] = all(0.4 <= r <= 0.6 for r in ratios)
    run.json("summary.json", summary)
    return summary


# ---------------------------------------------------------------- heisenberg lab


def cmd_heisenberg_lab(cfg: ExperimentConfig, run: Run) -> dict:
    with run.stage("build"):
        if cfg.get_str("target", "heis3") != "heis3":
            cfg._fail("target", "the Heisenberg lab needs target = heis3")
        tg = Heisenberg()
        x_words = cfg.get_words("x_words", ("acAC", "aacc"))
        rows = cfg.get_rows("lattice_targets", [["1", "0", "0"], ["0", "1", "0"]])
        gs = []
        for r in rows:
            try:
                x, y, z = (float(t) for t in r)
            except ValueError:
                cfg._fail("lattice_targets", "rows must be 'x y z' separated by ';'")
            g = tg.element(x, y, z)
            if not is_lattice_point(g):
                cfg._fail("lattice_targets", f"({x}, {y}, {z}) is not an integer lattice point")
            gs.append(g)
        tubes = cfg.get_bool("tubes", True) and bool(x_words)
        if tubes and len(gs) < len(x_words):
            cfg._fail("lattice_targets", f"need one target per x word ({len(x_words)})")
        a, bw = cfg.get_str("a", "a"), cfg.get_str("b", "c")
        ex_rows = cfg.get_rows("exponents", [["1", "2"], ["2", "3"], ["1", "3"]])
        try:
            exps = [(int(i), int(j)) for i, j in ex_rows]
        except ValueError:
            cfg._fail("exponents", "rows must be 'i j' separated by ';'")
        rng = rng_stream(cfg.seed, "lattice")
        wl = cfg.get_int("word_length", 8, minimum=1)
        lat_words = [random_word(rng, int(rng.integers(1, wl + 1))) for _ in range(cfg.get_int("lattice_words", 100, minimum=0))]
        lat_pairs = random_pairs(rng, range(2, 5), max(1, cfg.get_int("lattice_pairs", 30, minimum=0) // 3))
    with run.stage("lab"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        engine, rep = nonconstructible_lab(
            x_words if tubes else [],
            gs,
            a,
            bw,
            tuple(exps),
            cfg.get_int("n_max", 12, minimum=2),
            tol=min(cfg.tol, 1e-12),
            tubes=tubes,
            lattice_words=lat_words,
            lattice_pairs=lat_pairs,
            seed=cfg.seed,
            tube_length=cfg.get_float("tube_length", 0.6),
            tube_radius=cfg.get_float("tube_radius", 0.08),
        )
    run.csv("residuals.csv", ["word", "residual"], [(w, r) for w, r in zip(x_words if tubes else [], rep.residuals)])
    run.csv("centrality.csv", ["i", "j", "word", "is_central", "proj_x", "proj_y"],
            [(c["i"], c["j"], c["word"], c["is_central"], *c["projection"]) for c in rep.centrality])
    growth_rows = [(g["i"], g["j"], n + 1, v) for g in rep.growth for n, v in enumerate(g["norms"])]
    run.csv("growth.csv", ["i", "j", "n", "projection_norm"], growth_rows)
    run.csv("growth_fit.csv", ["i", "j", "r2", "exact_linear", "powers_agree"],
            [(g["i"], g["j"], g["r2"], g["exact_linear"], g["powers_agree"]) for g in rep.growth])
    summary = rep.summary()
    summary["tubes"] = tubes
    summary["covering_radius"] = HEISENBERG_COVERING_RADIUS
    run.json("summary.json", summary)
    return summary


# ---------------------------------------------------------------- brooks


def cmd_brooks(cfg: ExperimentConfig, run: Run) -> dict:
    src = cfg.raw.source
    e = cfg.raw.globals.get("words")
    words = e.value.split() if e else ["ab", "aabb", "abAB", "a", "b"]
    rows_in = cfg.get_rows("pairs", [["ab", "aabb"], ["abAB", "a"], ["a", "aaa"]])
    for w in words + [t for r in rows_in for t in r]:
        if set(w) - set(free_qm.FREE_LETTERS):
            raise ConfigError(f"free word {w!r} uses letters outside {free_qm.FREE_LETTERS!r}", e.line if e else None, src)
    table = []
    with run.stage("brooks"):
        for u in words:
            cu = free_qm.cyclic_reduce(u)
            if not cu or cu != free_qm.reduce(u):
                continue
            for w in words:
                table.append({"u": u, "w": w, "h": str(free_qm.brooks_h(cu, w)), "count": free_qm.brooks_count(cu, w)})
    certs = []
    with run.stage("vce"):
        for r in rows_in:
            if len(r) != 2:
                cfg._fail("pairs", "rows must be 'w1 w2' separated by ';'")
            certs.append(free_qm.vce_test(*r))
    run.csv("brooks.csv", ["u", "w", "h", "count"], table)
    run.csv("vce.csv", ["w1", "w2", "verdict", "rule", "h11", "h12", "h21", "h22"],
            [(c.pair[0], c.pair[1], c.verdict, c.rule, *map(str, c.values)) for c in certs])
    summary = {"values": len(table), "certificates": [c.to_dict() for c in certs]}
    run.json("summary.json", summary)
    return summary


# ---------------------------------------------------------------- area audit


def cmd_area_audit(cfg: ExperimentConfig, run: Run) -> dict:
    n = cfg.get_int("triangles", 10_000, minimum=1)
    nq = cfg.get_int("quadrature", 100, minimum=0)
    rmax = cfg.get_float("max_radius", 6.0)
    rng = rng_stream(cfg.seed, "triangles")
    rows = []
    with run.stage("gauss-bonnet"):
        for k in range(n):
            pts = random_disk_points(rng, 3, rmax)
            t = GeodesicTriangle(*pts)
            rows.append({"index": k, "area": triangle_area(t), **{f"v{i}_{p}": getattr(z, p) for i, z in enumerate(pts) for p in ("real", "imag")}})
    with run.stage("quadrature"):
        for r in rows[:nq]:
            t = GeodesicTriangle(*(complex(r[f"v{i}_real"], r[f"v{i}_imag"]) for i in range(3)))
            r["area_quadrature"] = triangle_area_by_quadrature(t)
            r["difference"] = abs(r["area"] - r["area_quadrature"])
    header = ["index", "v0_real", "v0_imag", "v1_real", "v1_imag", "v2_real", "v2_imag", "area", "area_quadrature", "difference"]
    run.csv("triangles.csv", header, rows)
    areas = [r["area"] for r in rows]
    diffs = [r["difference"] for r in rows if "difference" in r]
    summary = {
        "triangles": n,
        "max_area": max(areas),
        "all_below_pi": all(a < math.pi for a in areas),
        "quadrature_checked": len(diffs),
        "max_quadrature_difference": max(diffs, default=0.0),
    }
    run.json("summary.json", summary)
    return summary


def random_disk_points(rng: np.random.Generator, n: int, max_radius: float) -> list[complex]:
    """Points uniform in hyperbolic area inside the ball of radius ``max_radius`` about 0."""
    u = rng.uniform(0.0, 1.0, n)
    # area of the ball of radius r is 4 pi sinh^2(r/2)
    r = 2.0 * np.arcsinh(np.sqrt(u) * math.sinh(0.5 * max_radius))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return [complex(math.tanh(0.5 * ri) * math.cos(p), math.tanh(0.5 * ri) * math.sin(p)) for ri, p in zip(r, phi)]


# ---------------------------------------------------------------- entry point

COMMANDS = {
    "holonomy": cmd_holonomy,
    "defect-scan": cmd_defect_scan,
    "hbg": cmd_hbg,
    "kazhdan": cmd_kazhdan,
    "heisenberg-lab": cmd_heisenberg_lab,
    "brooks": cmd_brooks,
    "area-audit": cmd_area_audit,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoqm", description="Holonomy quasimorphism experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="plain-text configuration file")
        s.add_argument("--out", type=Path, help="output directory (default: out/<command>)")
        s.add_argument("--seed", type=int, help="overrides the configuration seed")
        s.add_argument("--tol", type=float, help="integration tolerance")
        s.add_argument("--threads", type=int, help="worker threads for independent words")
    return p


def run_command(command: str, config: Path | None = None, out: Path | None = None, seed: int | None = None,
                tol: float | None = None, threads: int | None = None, text: str | None = None) -> tuple[int, dict | None, Path]:
    """Run one experiment; returns ``(exit code, summary or None, output directory)``."""
    cfg = None
    out_dir = Path(out) if out else Path("out") / command
    try:
        cfg = load_config(config, command, text)
    except ConfigError as exc:
        run = Run(out_dir, command, "", __version__, seed or 0)
        run.fail(exc)
        run.finish()
        print(f"holoqm {command}: {exc}", file=sys.stderr)
        return 2, None, out_dir
    if seed is not None:
        cfg.seed = seed
    if tol is not None:
        if tol <= 0:
            print(f"holoqm {command}: --tol must be positive", file=sys.stderr)
            return 2, None, out_dir
        cfg.tol = tol
    if threads is not None:
        cfg.threads = max(1, threads)
    if out is None and cfg.out:
        out_dir = Path(cfg.out)
    run = Run(out_dir, command, cfg.digest, __version__, cfg.seed)
    code, summary = 0, None
    try:
        summary = COMMANDS[command](cfg, run)
    except ConfigError as exc:
        run.fail(exc)
        print(f"holoqm {command}: {exc}", file=sys.stderr)
        code = 2
    except Exception as exc:  # noqa: BLE001 - reported in the manifest
        run.fail(exc)
        print(f"holoqm {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    finally:
        run.finish()
    return code, summary, out_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, summary, out_dir = run_command(args.command, args.config, args.out, args.seed, args.tol, args.threads)
    if code == 0:
        print(f"holoqm {args.command}: ok, outputs in {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
