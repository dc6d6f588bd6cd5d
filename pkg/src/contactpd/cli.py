"""Command-line front end.

Subcommands: precompute, query, convergence, validate, genmesh, oracle.
Exit codes: 0 ok, 2 usage error, 3 data mismatch (wrong mesh/db pairing
or file format), 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import shapes
from .collision import Tolerances, is_collision
from .contactdb import DataMismatchError, SampleDB
from .mesh import TriMesh, load_mesh
from .oracles import generalized_pd_oracle, translational_pd_oracle
from .query import pd_query
from .sampling import BuildParams, build_contact_db, certify_sample
from .transforms import (Configuration, GENERALIZED, TRANSLATIONAL,
                         random_quat)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISMATCH = 3
EXIT_RUNTIME = 4

_MODE_NAMES = {"trans": TRANSLATIONAL, "gen": GENERALIZED}

QUERY_CSV_COLUMNS = ("query_index", "pd_value", "wtx", "wty", "wtz",
                     "wqw", "wqx", "wqy", "wqz", "refined", "status",
                     "micros")
CONVERGENCE_CSV_COLUMNS = ("samples", "mean_rel_error")
ORACLE_CSV_COLUMNS = ("query_index", "value", "micros")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated knobs shared by the subcommands."""

    mode: str = TRANSLATIONAL
    budget: int = 1000
    max_seeds: int | None = None
    step: str = "one-ring"
    dedup_radius: float | None = None
    rng_seed: int = 0
    k: int = 16
    ndirs: int = 800
    threads: int = 1

    def validate(self) -> None:
        if self.budget <= 0:
            raise UsageError("--budget must be positive")
        if self.max_seeds is not None and self.max_seeds <= 0:
            raise UsageError("--max-seeds must be positive")
        if self.dedup_radius is not None and self.dedup_radius <= 0:
            raise UsageError("--dedup-radius must be positive")
        if self.k <= 0:
            raise UsageError("--k must be positive")
        if self.ndirs <= 0:
            raise UsageError("--ndirs must be positive")
        if self.threads <= 0:
            raise UsageError("--threads must be positive")
        if not (self.step == "one-ring" or self.step.startswith("fixed:")):
            raise UsageError("--step must be one-ring or fixed:<d>")
        if self.step.startswith("fixed:"):
            try:
                d = float(self.step[6:])
            except ValueError as exc:
                raise UsageError("--step fixed:<d> needs a number") from exc
            if d <= 0:
                raise UsageError("--step fixed:<d> needs d > 0")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model-a", help="movable mesh file (OFF/OBJ)")
    p.add_argument("--model-b", help="fixed mesh file (OFF/OBJ)")
    p.add_argument("--mode", choices=sorted(_MODE_NAMES), default="trans")
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--max-seeds", type=int, default=None)
    p.add_argument("--step", default="one-ring",
                   help="one-ring or fixed:<d>")
    p.add_argument("--dedup-radius", type=float, default=None)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--db", help="sample database file")
    p.add_argument("--queries", help="CSV of 7-number configurations")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--ndirs", type=int, default=800)
    p.add_argument("--n-queries", type=int, default=100,
                   help="random query count for convergence")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output file")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="contactpd",
        description="Approximate global penetration depth via sampled "
                    "contact spaces")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("precompute", "build a contact sample database"),
            ("query", "answer PD queries from a database"),
            ("convergence", "error vs database size against the oracle"),
            ("validate", "re-certify every sample of a database"),
            ("genmesh", "emit a procedural benchmark mesh"),
            ("oracle", "brute-force PD reference values")):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        if name == "genmesh":
            p.add_argument("--shape", choices=sorted(shapes.SHAPES),
                           required=True)
            p.add_argument("--scale", type=float, default=1.0)
            p.add_argument("--subdiv", type=int, default=None)
        if name == "oracle":
            p.add_argument("--nsamples", type=int, default=2000,
                           help="sample count for the generalized oracle")
    return ap


def _cfg_from_args(args) -> RunConfig:
    cfg = RunConfig(mode=_MODE_NAMES[args.mode], budget=args.budget,
                    max_seeds=args.max_seeds, step=args.step,
                    dedup_radius=args.dedup_radius,
                    rng_seed=args.rng_seed, k=args.k, ndirs=args.ndirs,
                    threads=args.threads)
    cfg.validate()
    return cfg


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_"), None) is None:
            raise UsageError(f"--{name} is required for this subcommand")


def _load_pair(args) -> tuple[TriMesh, TriMesh]:
    _require(args, "model-a", "model-b")
    return load_mesh(args.model_a), load_mesh(args.model_b)


def _read_queries(path, mode) -> list[Configuration]:
    rows = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    if rows.shape[1] != 7:
        raise DataMismatchError(
            f"{path}: query rows need 7 numbers (tx,ty,tz,qw,qx,qy,qz)")
    return [Configuration.from_row(r, mode) for r in rows]


def _write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    lines += [",".join(str(x) for x in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_precompute(args) -> int:
    cfg = _cfg_from_args(args)
    _require(args, "db")
    A, B = _load_pair(args)
    params = BuildParams(mode=cfg.mode, budget=cfg.budget,
                         max_seeds=cfg.max_seeds, step=cfg.step,
                         dedup_radius=cfg.dedup_radius,
                         rng_seed=cfg.rng_seed, threads=cfg.threads)
    db, stats = build_contact_db(A, B, params)
    db.save(args.db)
    stats_path = args.out or (str(args.db) + ".stats.json")
    Path(stats_path).write_text(
        json.dumps(stats.as_dict(), sort_keys=True, indent=1) + "\n")
    print(f"wrote {len(db)} samples ({stats.seeds} seeds, "
          f"{stats.propagated} propagated) to {args.db}")
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _cfg_from_args(args)
    _require(args, "db", "queries", "out")
    A, B = _load_pair(args)
    db = SampleDB.load(args.db, A, B)
    queries = _read_queries(args.queries, db.mode)
    rows = []
    values = []
    micros = []
    for i, q0 in enumerate(queries):
        res = pd_query(A, B, db, q0, cfg.k)
        status = "ok" if res.penetrating else "not_penetrating"
        if res.error:
            status = "error"
        w = res.witness.to_row()
        rows.append((i, repr(float(res.value)),
                     *[repr(float(x)) for x in w],
                     str(res.refined).lower(), status,
                     f"{res.micros:.1f}"))
        if res.error is None:
            values.append(res.value)
            micros.append(res.micros)
    mean_pd = float(np.mean(values)) if values else float("nan")
    mean_us = float(np.mean(micros)) if micros else float("nan")
    rows.append(("mean", repr(mean_pd), "", "", "", "", "", "", "", "",
                 "", f"{mean_us:.1f}"))
    _write_csv(args.out, QUERY_CSV_COLUMNS, rows)
    print(f"{len(queries)} queries, mean pd {mean_pd:.6g}, "
          f"mean {mean_us:.1f} us")
    return EXIT_OK


def random_in_collision(A, B, mode, rng, n) -> list[Configuration]:
    """Rejection-sample n in-collision configurations near B."""
    lo, hi = B.bounds
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) + 0.25 * A.bbox_diagonal
    out = []
    while len(out) < n:
        t = c + (2.0 * rng.random(3) - 1.0) * half
        rot = None if mode == TRANSLATIONAL else random_quat(rng)
        q = Configuration(t, rot, mode)
        if is_collision(A, q, B):
            out.append(q)
    return out


def cmd_convergence(args) -> int:
    cfg = _cfg_from_args(args)
    _require(args, "out")
    A, B = _load_pair(args)
    params = BuildParams(mode=cfg.mode, budget=cfg.budget,
                         max_seeds=cfg.max_seeds, step=cfg.step,
                         dedup_radius=cfg.dedup_radius,
                         rng_seed=cfg.rng_seed, threads=cfg.threads)
    db, _ = build_contact_db(A, B, params)
    rng = np.random.default_rng(cfg.rng_seed + 1)
    if args.queries:
        queries = _read_queries(args.queries, db.mode)
    else:
        queries = random_in_collision(A, B, db.mode, rng, args.n_queries)
    reference = [translational_pd_oracle(A, q0, B, cfg.ndirs).value
                 for q0 in queries]
    sizes = []
    size = 100
    while size < len(db):
        sizes.append(size)
        size *= 10
    sizes.append(len(db))
    rows = []
    for n in sizes:
        sub = db.prefix(n)
        errs = []
        for q0, ref in zip(queries, reference):
            got = pd_query(A, B, sub, q0, cfg.k).value
            errs.append(abs(got - ref) / max(ref, 1e-300))
        rows.append((n, repr(float(np.mean(errs)))))
        print(f"samples {n:>8d}  mean rel error {float(np.mean(errs)):.4f}")
    _write_csv(args.out, CONVERGENCE_CSV_COLUMNS, rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    _require(args, "db")
    A, B = _load_pair(args)
    db = SampleDB.load(args.db, A, B)
    tol = Tolerances.for_mesh(B)
    bad = 0
    for i, s in enumerate(db):
        problems = certify_sample(A, B, s, tol)
        for msg in problems:
            print(f"sample {i}: {msg}", file=sys.stderr)
        bad += bool(problems)
    if len(db) <= 10_000:
        emb = db.embeddings()
        from scipy.spatial import cKDTree
        tree = cKDTree(emb)
        pairs = tree.query_pairs(db.dedup_radius * (1 - 1e-12))
        for a, b in sorted(pairs):
            print(f"samples {a},{b}: closer than the dedup radius",
                  file=sys.stderr)
        bad += len(pairs)
    if bad:
        print(f"{bad} violations in {len(db)} samples", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(db)} samples certified")
    return EXIT_OK


def cmd_genmesh(args) -> int:
    _require(args, "out")
    kwargs = {}
    if args.subdiv is not None:
        kwargs["subdivisions"] = args.subdiv
    mesh = shapes.SHAPES[args.shape](**kwargs)
    if args.scale != 1.0:
        mesh = TriMesh(np.asarray(mesh.vertices) * args.scale,
                       mesh.triangles)
    mesh.save(args.out)
    print(f"wrote {args.shape}: {mesh.n_vertices} vertices, "
          f"{len(mesh)} triangles to {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _cfg_from_args(args)
    _require(args, "queries", "out")
    A, B = _load_pair(args)
    queries = _read_queries(args.queries, cfg.mode)
    rng = np.random.default_rng(cfg.rng_seed)
    rows = []
    for i, q0 in enumerate(queries):
        t0 = time.perf_counter()
        if not is_collision(A, q0, B):
            value = 0.0
        elif cfg.mode == TRANSLATIONAL:
            value = translational_pd_oracle(A, q0, B, cfg.ndirs).value
        else:
            value = generalized_pd_oracle(A, q0, B, args.nsamples,
                                          rng).value
        us = (time.perf_counter() - t0) * 1e6
        rows.append((i, repr(float(value)), f"{us:.1f}"))
    _write_csv(args.out, ORACLE_CSV_COLUMNS, rows)
    print(f"{len(rows)} oracle values written to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "precompute": cmd_precompute,
    "query": cmd_query,
    "convergence": cmd_convergence,
    "validate": cmd_validate,
    "genmesh": cmd_genmesh,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataMismatchError as exc:
        print(f"data mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
