"""Approximate global penetration depth between non-convex triangle
meshes via sampled contact spaces.

Precompute a contact-space sample database once (random CCD seeds plus
sliding propagation), then answer translational or generalized PD queries
by nearest-neighbor search with local projection refinement.
"""

from .collision import (CcdResult, ContactPair, Tolerances,
                        ccd_first_contact, contact_pairs,
                        critical_configuration, is_collision, min_distance)
from .contactdb import ContactSample, DataMismatchError, SampleDB
from .mesh import MassProperties, MeshError, TriMesh, load_mesh
from .oracles import (OracleResult, generalized_pd_oracle,
                      translational_pd_oracle)
from .query import PDResult, batch_pd, pd_query
from .sampling import (BuildParams, PropagationStats, build_contact_db,
                       propagate, random_contact_seed, slide_transition)
from .transforms import (Configuration, GENERALIZED, TRANSLATIONAL, apply,
                         dist, embed, interpolate, unembed)

__all__ = [
    "BuildParams", "CcdResult", "Configuration", "ContactPair",
    "ContactSample", "DataMismatchError", "GENERALIZED", "MassProperties",
    "MeshError", "OracleResult", "PDResult", "PropagationStats",
    "SampleDB", "TRANSLATIONAL", "Tolerances", "TriMesh", "apply",
    "batch_pd", "build_contact_db", "ccd_first_contact", "contact_pairs",
    "critical_configuration", "dist", "embed", "generalized_pd_oracle",
    "interpolate", "is_collision", "load_mesh", "min_distance",
    "pd_query", "propagate", "random_contact_seed", "slide_transition",
    "translational_pd_oracle", "unembed",
]

__version__ = "0.1.0"
