"""Command line entry point: ``klab run <kind> [flags]``.

Every run is described by a manifest (kind, parameters, seed, workers,
output directory).  Results go to ``<out>/results.csv`` and
``<out>/summary.json``; the summary embeds the manifest digest, which
ignores the worker count and output paths, so reruns with different worker
counts produce byte-identical summaries.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from fractions import Fraction

from . import dio, experiments, ifs
from .errors import ConfigError, DomainError, ResourceError
from .homsp import Rect
from .seeds import default_workers

SCHEMA = "klab.manifest/1"
SUMMARY_SCHEMA = "klab.summary/1"
KINDS = ("khintchine", "walk", "translate", "double", "correlation", "regularity", "identity-suite")
BUILTIN_IFS = {"cantor": ifs.CANTOR, "lebesgue": ifs.LEBESGUE}

DEFAULTS = {
    "psi": "power:1,1",
    "N": 10**6,
    "samples": 100,
    "steps": 100,
    "tau": "2",
    "t_grid": [100, 1000, 10000, 100000],
    "t1": 100,
    "rect": ["0", "1", "1/2", "1"],
    "precision_bits": 192,
    "side": "plus",
}


# ---------------------------------------------------------------------------
# manifest


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def manifest_digest(manifest: dict) -> str:
    core = {k: v for k, v in manifest.items() if k not in ("workers", "outputs")}
    return hashlib.sha256(canonical_json(core).encode("utf-8")).hexdigest()


def load_manifest(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path}: {exc}") from None
    validate_manifest(m)
    return m


def validate_manifest(m: dict) -> None:
    if not isinstance(m, dict) or m.get("schema") != SCHEMA:
        raise ConfigError(f"manifest: schema must be {SCHEMA!r}")
    if m.get("kind") not in KINDS:
        raise ConfigError(f"manifest: kind must be one of {', '.join(KINDS)}")
    if not isinstance(m.get("seed"), int) or not 0 <= m["seed"] < 2**64:
        raise ConfigError("manifest: seed must be a 64-bit unsigned integer")
    if not isinstance(m.get("params"), dict):
        raise ConfigError("manifest: params must be an object")
    w = m.get("workers", 1)
    if not isinstance(w, int) or w < 1:
        raise ConfigError("manifest: workers must be a positive integer")


def _number(text, field, integer=False):
    try:
        v = Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{field}: cannot parse {text!r}") from None
    if integer:
        if v.denominator != 1:
            raise ConfigError(f"{field}: expected an integer, got {text!r}")
        return int(v)
    return v


def build_manifest(args) -> dict:
    kind = args.kind
    p: dict = {}
    if args.ifs is not None:
        p["ifs"] = ifs.system_to_text(resolve_ifs(args.ifs))
    elif kind not in ("identity-suite", "correlation"):
        p["ifs"] = ifs.system_to_text(ifs.CANTOR)
    for name in ("psi", "side"):
        v = getattr(args, name)
        if v is not None:
            p[name] = v
    for name in ("N", "samples", "steps", "precision_bits", "N0"):
        v = getattr(args, name)
        if v is not None:
            p[name] = _number(v, "--" + name.replace("_", "-"), integer=True)
    if args.tau is not None:
        p["tau"] = str(_number(args.tau, "--tau"))
    if args.t_grid is not None:
        p["t_grid"] = [float(_number(x, "--t-grid")) for x in args.t_grid.split(",")]
    if args.t1 is not None:
        p["t1"] = float(_number(args.t1, "--t1"))
    if args.rect is not None:
        parts = args.rect.split(",")
        if len(parts) != 4:
            raise ConfigError("--rect: expected x0,x1,y0,y1")
        p["rect"] = [str(_number(x, "--rect")) for x in parts]
    if args.ball_radius is not None:
        p["ball_radius"] = float(_number(args.ball_radius, "--ball-radius"))
    if args.effective:
        p["effective"] = True
    seed = _number(args.seed, "--seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed: must be a 64-bit unsigned integer")
    workers = args.workers if args.workers is not None else default_workers()
    m = {"schema": SCHEMA, "kind": kind, "seed": seed, "params": p, "workers": workers,
         "outputs": {"dir": args.out or os.path.join("klab-out", kind)}}
    validate_manifest(m)
    return m


def resolve_ifs(name: str) -> ifs.AffineSystem:
    if name in BUILTIN_IFS:
        return BUILTIN_IFS[name]
    if not os.path.exists(name):
        raise ConfigError(f"--ifs: file {name!r} does not exist")
    return ifs.load_ifs(name)


# ---------------------------------------------------------------------------
# execution


def _param(p, name):
    return p.get(name, DEFAULTS.get(name))


def execute(manifest: dict) -> experiments.Outcome:
    kind = manifest["kind"]
    p = manifest["params"]
    seed = manifest["seed"]
    workers = manifest.get("workers", 1)
    system = ifs.parse_ifs(p["ifs"]) if "ifs" in p else ifs.CANTOR
    if kind != "identity-suite" and "ifs" in p:
        rep = ifs.validate(system)
        if not rep.contracting:
            raise ConfigError("ifs: system is not contracting in average")
        if rep.common_fixed_point is not None:
            raise ConfigError(f"ifs: all maps fix {rep.common_fixed_point}; the measure is a point mass")
    rect = Rect(*(Fraction(x) for x in _param(p, "rect")))
    try:
        psi = dio.ApproxFn.parse(_param(p, "psi"))
    except ConfigError as exc:
        raise ConfigError(f"--psi: {exc}") from None
    if kind == "khintchine":
        return experiments.khintchine(system, psi, _param(p, "N"), _param(p, "samples"), seed,
                                      _param(p, "side"), bool(p.get("effective")), _param(p, "precision_bits"),
                                      p.get("N0"), workers, Fraction(_param(p, "tau")))
    if kind == "walk":
        return experiments.walk_run(system, _param(p, "steps"), _param(p, "samples"), seed, rect,
                                    ball_radius=p.get("ball_radius"), workers=workers)
    if kind == "translate":
        return experiments.translate_run(system, _param(p, "t_grid"), _param(p, "samples"), seed, rect, workers)
    if kind == "double":
        return experiments.double_run(system, _param(p, "t1"), _param(p, "t_grid"), _param(p, "samples"), seed, rect,
                                      workers=workers)
    if kind == "correlation":
        return experiments.correlation_run(_param(p, "t_grid"), _param(p, "samples"), seed, rect, workers)
    if kind == "regularity":
        return experiments.regularity_run(system, _param(p, "samples"), seed, steps=_param(p, "steps"))
    return experiments.identity_suite(seed)


def summary_json(manifest: dict, outcome: experiments.Outcome) -> str:
    doc = {
        "schema": SUMMARY_SCHEMA,
        "kind": manifest["kind"],
        "claim": outcome.claim,
        "manifest_digest": manifest_digest(manifest),
        "seed": manifest["seed"],
        "params": manifest["params"],
        "count": len(outcome.rows),
        "ok": outcome.ok,
        "results": outcome.results,
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".klab-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(manifest: dict, outcome: experiments.Outcome, figures: bool = False) -> dict:
    out = manifest["outputs"]["dir"]
    paths = {
        "csv": os.path.join(out, "results.csv"),
        "json": os.path.join(out, "summary.json"),
        "manifest": os.path.join(out, "manifest.json"),
    }
    try:
        write_atomic(paths["csv"], csv_text(outcome.header, outcome.rows))
        write_atomic(paths["json"], summary_json(manifest, outcome))
        write_atomic(paths["manifest"], json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        if figures:
            for name, fn in outcome.figures:
                paths[name] = fn(os.path.join(out, name))
    except OSError as exc:
        raise OSError(f"writing results under {out!r}: {exc}") from exc
    return paths


# ---------------------------------------------------------------------------


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klab", description="self-similar measures, lattices and Diophantine counting")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("kind", nargs="?", choices=KINDS)
    r.add_argument("--manifest", help="read the full manifest from a JSON file")
    r.add_argument("--ifs", help="IFS definition file, or 'cantor' / 'lebesgue'")
    r.add_argument("--psi", help="power:c,alpha | logpower:beta | table:v1,v2,...")
    r.add_argument("--N")
    r.add_argument("--N0", help="khintchine: also count new solutions in (N0, N]")
    r.add_argument("--samples")
    r.add_argument("--steps")
    r.add_argument("--tau")
    r.add_argument("--t-grid", dest="t_grid")
    r.add_argument("--t1")
    r.add_argument("--rect", help="x0,x1,y0,y1 for [x0,x1) x (y0,y1]")
    r.add_argument("--side", choices=("plus", "minus", "both"))
    r.add_argument("--effective", action="store_true", help="normalize by sum of min(psi, 1/q)")
    r.add_argument("--ball-radius", dest="ball_radius")
    r.add_argument("--seed", default="0")
    r.add_argument("--workers", type=int)
    r.add_argument("--precision-bits", dest="precision_bits")
    r.add_argument("--out")
    r.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSV")
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        if args.manifest:
            manifest = load_manifest(args.manifest)
            if args.workers is not None:
                manifest["workers"] = args.workers
            if args.out:
                manifest["outputs"] = {"dir": args.out}
        else:
            if args.kind is None:
                raise ConfigError("run: give an experiment kind or --manifest")
            manifest = build_manifest(args)
        outcome = execute(manifest)
        paths = emit(manifest, outcome, args.figures)
    except (ConfigError, DomainError) as exc:
        print(f"klab: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"klab: resource limit: {exc}", file=sys.stderr)
        return 3
    print(paths["json"])
    return 0 if outcome.ok else 1


if __name__ == "__main__":
    sys.exit(main())
