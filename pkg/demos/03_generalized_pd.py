"""Generalized penetration depth: rotations shorten the exit.

The generalized metric is the object norm (volume-averaged RMS point
displacement). Sampling the 6-D contact space is slower to converge than
the translational case, but for tilted poses the reported motion drops
below the best pure translation.
"""

import time

import numpy as np

from contactpd import BuildParams, build_contact_db, pd_query, shapes
from contactpd.oracles import (generalized_pd_oracle,
                               translational_pd_oracle)
from contactpd.transforms import (Configuration, GENERALIZED,
                                  quat_from_axis_angle)

A = shapes.cube()
B = shapes.cube()

print("building a 20k-sample generalized contact database ...")
t0 = time.time()
db, stats = build_contact_db(A, B, BuildParams(
    mode=GENERALIZED, budget=20_000, rng_seed=3, dedup_radius=0.01))
print(f"  {len(db)} samples in {time.time() - t0:.1f}s "
      f"({stats.seeds} seeds; generalized floods amortize "
      f"{stats.propagated / max(stats.seeds, 1):.0f}x)")

pose = Configuration([0.4, 0.1, 0.0],
                     quat_from_axis_angle([0, 0, 1], 0.3), GENERALIZED)
res = pd_query(A, B, db, pose)
trans = translational_pd_oracle(A, pose, B, ndirs=500, tol=1e-4)
gen = generalized_pd_oracle(A, pose, B, 1500, np.random.default_rng(5))

print(f"\ntilted overlapping pose:")
print(f"  best pure translation (oracle): {trans.value:.4f}")
print(f"  generalized query over the database: {res.value:.4f} "
      f"(refined={res.refined})")
print(f"  generalized sampling oracle: {gen.value:.4f}")
print("the generalized oracle dips below the best translation; the")
print("database query approaches it from above as the sample count grows")
