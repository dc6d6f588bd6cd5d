"""Contact sample storage: columnar sample set, embedding index,
versioned persistence.

A sample database pairs with exactly the two meshes it was built from;
files carry both mesh hashes and readers reject mismatches. Persisted
bytes are a pure function of the sample set, so identical builds produce
identical files.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh
from .transforms import (Configuration, GENERALIZED, METRICS, MODES,
                         TRANSLATIONAL, embed_with_sigma)

FORMAT_VERSION = 1

KIND_SEED = 0
KIND_PROPAGATED = 1
_KIND_NAMES = {KIND_SEED: "seed", KIND_PROPAGATED: "propagated"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class DataMismatchError(ValueError):
    """Database file does not pair with the given meshes or format."""


@dataclass(frozen=True)
class ContactSample:
    """One certified contact-space sample.

    ``anchor_tri``/``anchor_bary`` name the held feature of A,
    ``vertex_B`` the contact vertex on B. ``rel_orient`` is the relative
    orientation record: shape (1,) with the contact-normal angle in
    translational mode, shape (4,) with the quaternion carrying B's
    contact frame to A's rotation in generalized mode.
    """

    q: Configuration
    anchor_tri: int
    anchor_bary: np.ndarray
    vertex_B: int
    rel_orient: np.ndarray
    kind: str

    @property
    def is_seed(self) -> bool:
        return self.kind == "seed"


class _EmbeddingIndex:
    """Growable 6-D point set with amortized kd-tree rebuilds.

    Queries combine the built tree with a linear scan of the unbuilt
    tail. Thread-safe; used concurrently in the worker-pool build mode.
    """

    def __init__(self, dim: int = 6):
        self._pts = np.empty((256, dim))
        self._n = 0
        self._tree: cKDTree | None = None
        self._built = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._n

    def add(self, p: np.ndarray) -> None:
        with self._lock:
            if self._n == len(self._pts):
                grown = np.empty((2 * len(self._pts), self._pts.shape[1]))
                grown[:self._n] = self._pts[:self._n]
                self._pts = grown
            self._pts[self._n] = p
            self._n += 1
            if self._n - self._built > max(256, self._built // 4):
                self._rebuild()

    def _rebuild(self) -> None:
        self._tree = cKDTree(self._pts[:self._n])
        self._built = self._n

    def rebuild(self) -> None:
        with self._lock:
            if self._n:
                self._rebuild()

    def reset(self, pts: np.ndarray) -> None:
        with self._lock:
            self._pts = np.array(pts, dtype=np.float64).reshape(-1, 6)
            self._n = len(self._pts)
            self._tree = None
            self._built = 0
            if self._n:
                self._rebuild()

    def any_within(self, p: np.ndarray, r: float) -> bool:
        with self._lock:
            if self._built:
                d, _ = self._tree.query(p, k=1)
                if d <= r:
                    return True
            tail = self._pts[self._built:self._n]
        if len(tail):
            return bool((((tail - p) ** 2).sum(axis=1) <= r * r).any())
        return False

    def nearest(self, p: np.ndarray, k: int):
        """Indices and distances of up to k nearest points."""
        with self._lock:
            n = self._n
            if n == 0:
                return np.empty(0, np.int64), np.empty(0)
            built = self._built
            tree = self._tree
            tail = self._pts[built:n].copy()
        cand_i = []
        cand_d = []
        if built:
            d, i = tree.query(p, k=min(k, built))
            cand_d.extend(np.atleast_1d(d))
            cand_i.extend(np.atleast_1d(i))
        if len(tail):
            d = np.linalg.norm(tail - p, axis=1)
            cand_d.extend(d)
            cand_i.extend(built + np.arange(len(tail)))
        cand_d = np.asarray(cand_d)
        cand_i = np.asarray(cand_i, dtype=np.int64)
        order = np.argsort(cand_d, kind="stable")[:k]
        return cand_i[order], cand_d[order]


class SampleDB:
    """The sampled approximation of the contact space.

    Samples are stored columnar; the kd index lives over their 6-D
    embeddings. Rows appended through :meth:`append` must already satisfy
    the contact certificate; the index may temporarily hold reserved
    (queued) embeddings during a build until :meth:`finalize` reconciles
    it with the stored rows.
    """

    def __init__(self, mesh_a: TriMesh, mesh_b: TriMesh, mode: str,
                 metric: str, dedup_radius: float, rng_seed: int,
                 sigma: float, step_policy: str = "one-ring"):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        if dedup_radius <= 0.0:
            raise ValueError("dedup radius must be positive")
        self.mesh_hash_a = mesh_a.content_hash
        self.mesh_hash_b = mesh_b.content_hash
        self.mode = mode
        self.metric = metric
        self.dedup_radius = float(dedup_radius)
        self.rng_seed = int(rng_seed)
        self.sigma = float(sigma)
        self.step_policy = step_policy
        self.meta: dict = {}

        self._qs = np.empty((256, 7))
        self._anchor_tri = np.empty(256, np.int64)
        self._anchor_bary = np.empty((256, 3))
        self._vertex_b = np.empty(256, np.int64)
        self._rel = np.empty((256, 4))
        self._kind = np.empty(256, np.uint8)
        self._n = 0
        self.index = _EmbeddingIndex()

    # -- storage --------------------------------------------------------

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        cap = 2 * len(self._qs)
        for name in ("_qs", "_anchor_tri", "_anchor_bary", "_vertex_b",
                     "_rel", "_kind"):
            old = getattr(self, name)
            shape = (cap,) + old.shape[1:]
            new = np.empty(shape, dtype=old.dtype)
            new[:self._n] = old[:self._n]
            setattr(self, name, new)

    def append(self, s: ContactSample) -> int:
        if self._n == len(self._qs):
            self._grow()
        i = self._n
        self._qs[i] = s.q.to_row()
        self._anchor_tri[i] = s.anchor_tri
        self._anchor_bary[i] = s.anchor_bary
        self._vertex_b[i] = s.vertex_B
        rel = np.zeros(4)
        rel[:len(s.rel_orient)] = s.rel_orient
        self._rel[i] = rel
        self._kind[i] = _KIND_CODES[s.kind]
        self._n = i + 1
        return i

    def sample(self, i: int) -> ContactSample:
        if not 0 <= i < self._n:
            raise IndexError(i)
        rel = self._rel[i]
        if self.mode == TRANSLATIONAL:
            rel = rel[:1].copy()
        else:
            rel = rel.copy()
        return ContactSample(
            q=Configuration.from_row(self._qs[i], self.mode),
            anchor_tri=int(self._anchor_tri[i]),
            anchor_bary=self._anchor_bary[i].copy(),
            vertex_B=int(self._vertex_b[i]),
            rel_orient=rel,
            kind=_KIND_NAMES[int(self._kind[i])],
        )

    def __iter__(self):
        for i in range(self._n):
            yield self.sample(i)

    @property
    def configurations(self) -> np.ndarray:
        return self._qs[:self._n]

    @property
    def vertex_b(self) -> np.ndarray:
        return self._vertex_b[:self._n]

    @property
    def kinds(self) -> np.ndarray:
        return self._kind[:self._n]

    def counts(self) -> tuple[int, int]:
        kinds = self._kind[:self._n]
        seeds = int((kinds == KIND_SEED).sum())
        return seeds, self._n - seeds

    # -- embeddings ------------------------------------------------------

    def embed(self, q: Configuration) -> np.ndarray:
        return embed_with_sigma(q, self.sigma)

    def embeddings(self) -> np.ndarray:
        qs = self._qs[:self._n]
        out = np.empty((self._n, 6))
        out[:, :3] = qs[:, :3]
        if self.mode == TRANSLATIONAL:
            out[:, 3:] = 0.0
        else:
            for i in range(self._n):
                out[i] = self.embed(
                    Configuration.from_row(qs[i], self.mode))
        return out

    def dedup_hit(self, q: Configuration, r: float | None = None) -> bool:
        """True iff a stored (or reserved) sample lies within r of q in
        the embedding."""
        if r is None:
            r = self.dedup_radius
        return self.index.any_within(self.embed(q), r)

    def finalize(self) -> None:
        """Rebuild the index from the stored rows only (drops reserved
        embeddings left behind by an aborted build)."""
        self.index.reset(self.embeddings())

    def prefix(self, n: int) -> "SampleDB":
        """A standalone database over the first n samples."""
        if not 0 < n <= self._n:
            raise ValueError(f"prefix size {n} out of range")
        out = SampleDB.__new__(SampleDB)
        out.__dict__ = {}
        for attr in ("mesh_hash_a", "mesh_hash_b", "mode", "metric",
                     "dedup_radius", "rng_seed", "sigma", "step_policy"):
            setattr(out, attr, getattr(self, attr))
        out.meta = dict(self.meta)
        out._qs = self._qs[:n].copy()
        out._anchor_tri = self._anchor_tri[:n].copy()
        out._anchor_bary = self._anchor_bary[:n].copy()
        out._vertex_b = self._vertex_b[:n].copy()
        out._rel = self._rel[:n].copy()
        out._kind = self._kind[:n].copy()
        out._n = n
        out.index = _EmbeddingIndex()
        out.finalize()
        return out

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        seeds, propagated = self.counts()
        header = {
            "format_version": FORMAT_VERSION,
            "mesh_hash_a": self.mesh_hash_a,
            "mesh_hash_b": self.mesh_hash_b,
            "mode": self.mode,
            "metric": self.metric,
            "dedup_radius": self.dedup_radius,
            "rng_seed": self.rng_seed,
            "sigma": self.sigma,
            "step_policy": self.step_policy,
            "seed_count": seeds,
            "propagated_count": propagated,
        }
        lines = [json.dumps(header, sort_keys=True,
                            separators=(",", ":"))]
        for i in range(self._n):
            rel = self._rel[i]
            rel_out = [rel[0]] if self.mode == TRANSLATIONAL else list(rel)
            row = {
                "q": list(self._qs[i]),
                "anchor": [int(self._anchor_tri[i]),
                           self._anchor_bary[i, 0], self._anchor_bary[i, 1]],
                "vertex_b": int(self._vertex_b[i]),
                "rel_orient": rel_out,
                "kind": _KIND_NAMES[int(self._kind[i])],
            }
            lines.append(json.dumps(row, sort_keys=True,
                                    separators=(",", ":")))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path, mesh_a: TriMesh, mesh_b: TriMesh) -> "SampleDB":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise DataMismatchError(f"{path}: empty database file")
        header = json.loads(lines[0])
        if header.get("format_version") != FORMAT_VERSION:
            raise DataMismatchError(
                f"{path}: format_version {header.get('format_version')} "
                f"!= {FORMAT_VERSION}")
        if header["mesh_hash_a"] != mesh_a.content_hash:
            raise DataMismatchError(f"{path}: movable mesh hash mismatch")
        if header["mesh_hash_b"] != mesh_b.content_hash:
            raise DataMismatchError(f"{path}: fixed mesh hash mismatch")
        db = cls(mesh_a, mesh_b, header["mode"], header["metric"],
                 header["dedup_radius"], header["rng_seed"],
                 header["sigma"], header.get("step_policy", "one-ring"))
        mode = header["mode"]
        for line in lines[1:]:
            row = json.loads(line)
            bary = np.array([row["anchor"][1], row["anchor"][2], 0.0])
            bary[2] = 1.0 - bary[0] - bary[1]
            rel = np.asarray(row["rel_orient"], dtype=np.float64)
            db.append(ContactSample(
                q=Configuration.from_row(row["q"], mode),
                anchor_tri=int(row["anchor"][0]),
                anchor_bary=bary,
                vertex_B=int(row["vertex_b"]),
                rel_orient=rel,
                kind=row["kind"],
            ))
        expected = header["seed_count"] + header["propagated_count"]
        if expected != len(db):
            raise DataMismatchError(
                f"{path}: header counts {expected} != {len(db)} rows")
        db.finalize()
        return db
