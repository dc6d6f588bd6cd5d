"""Error versus database size on the torus pair.

The query error against the brute-force directional oracle falls roughly
quadratically with sample spacing: nested prefixes of one build show the
curve. This is the small version of the acceptance convergence run (which
goes to 1e5 samples).
"""

import time

import numpy as np

from contactpd import BuildParams, build_contact_db, pd_query, shapes
from contactpd.collision import is_collision
from contactpd.oracles import translational_pd_oracle
from contactpd.transforms import Configuration

T = shapes.torus()
print("building a 10k-sample torus/torus database ...")
t0 = time.time()
db, _ = build_contact_db(T, T, BuildParams(
    budget=10_000, rng_seed=7, dedup_radius=0.0015))
print(f"  done in {time.time() - t0:.1f}s")

rng = np.random.default_rng(123)
queries = []
while len(queries) < 30:
    q = Configuration(rng.uniform(-2.0, 2.0, size=3))
    if is_collision(T, q, T):
        queries.append(q)
print("computing 30 oracle references (ndirs=500) ...")
refs = [translational_pd_oracle(T, q, T, 500, 1e-4).value
        for q in queries]

print(f"\n{'samples':>8} {'mean rel error':>15}")
for n in (100, 1000, 5000, 10_000):
    sub = db.prefix(n)
    errs = [abs(pd_query(T, T, sub, q).value - r) / r
            for q, r in zip(queries, refs)]
    print(f"{n:8d} {np.mean(errs):15.4f}")
