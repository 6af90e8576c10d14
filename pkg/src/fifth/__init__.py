"""fifth: a constraint engine built on propagation of partial information.

Programs are networks of cells holding lattice values; monotone propagators
work out the implications of every write. Recursive definitions expand
lazily and without bound, search branches over explicit choice points with
snapshot restore, and a hierarchy of autoencoders compresses frame states to
guide value ordering in search, planning, and scheduling queries.
"""

from fifth.lattice import (
    NOTHING,
    Contradiction,
    Exact,
    FiniteDomain,
    IntInterval,
    PartialInfo,
    RealInterval,
    exact,
    finite_domain,
    info_bits,
    int_interval,
    merge,
    real_interval,
    refines,
)
from fifth.network import Network, QuiescenceReport, WriteResult
from fifth.language import (
    Instance,
    Program,
    QuerySpec,
    demand_loop,
    expand,
    instantiate,
    parse,
)
from fifth.hierarchy import (
    AugmentationTree,
    LearnedOracle,
    TraceLog,
    featurize,
    load_bundle,
    save_bundle,
)
from fifth.search import (
    OptimizeResult,
    Query,
    SnapshotStore,
    SolutionSet,
    UniformOracle,
    collect_garbage,
    optimize,
    solve,
)
from fifth.planning import (
    HorizonProblem,
    JobShopInstance,
    check_temporal_locality,
    emit_horizon_program,
    emit_jobshop_program,
    extract_schedule,
    generate_random_csp,
)

__all__ = [
    "AugmentationTree",
    "check_temporal_locality",
    "collect_garbage",
    "Contradiction",
    "demand_loop",
    "emit_horizon_program",
    "emit_jobshop_program",
    "Exact",
    "exact",
    "expand",
    "extract_schedule",
    "featurize",
    "finite_domain",
    "FiniteDomain",
    "generate_random_csp",
    "HorizonProblem",
    "info_bits",
    "Instance",
    "instantiate",
    "int_interval",
    "IntInterval",
    "JobShopInstance",
    "LearnedOracle",
    "load_bundle",
    "merge",
    "Network",
    "NOTHING",
    "optimize",
    "OptimizeResult",
    "parse",
    "PartialInfo",
    "Program",
    "Query",
    "QuerySpec",
    "QuiescenceReport",
    "real_interval",
    "RealInterval",
    "refines",
    "save_bundle",
    "SnapshotStore",
    "SolutionSet",
    "solve",
    "TraceLog",
    "UniformOracle",
    "WriteResult",
]

__version__ = "0.1.0"
