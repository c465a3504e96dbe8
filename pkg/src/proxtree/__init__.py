"""Binary spatial trees for nearest-neighbor search and the proximity problems built on them."""
from .chromatic import (
    BCP_MODES,
    ColorMap,
    NoOppositeColor,
    bcp,
    bnns_via_cnns,
    bnns_via_nns,
    cnns,
    filtered_scan,
    nns_via_bnns,
    recolor,
)
from .difficulty import PotentialReport, ScheduleStep, batch_phi, batch_schedule, phi, phi2
from .dualbatch import DualResult, QueryTree, build_query_tree, dual_bounds, dual_nns
from .geoproblems import (
    EmstResult,
    KCenterResult,
    emst_boruvka,
    farthest_first,
    greedy_tsp,
    kcenter_cost,
    knn_classify,
)
from .lsh import LshIndex, LshParams, collision_rate, lsh_build, lsh_query
from .metricspace import (
    EUCLIDEAN,
    DimensionMismatch,
    DomainError,
    EmptyDatasetError,
    Metric,
    PointSet,
    as_pointset,
    brute_fn,
    brute_nn,
    distance,
)
from .spatialtree import (
    SPILL_MODES,
    SPLIT_KINDS,
    SearchReport,
    SpatialTree,
    SplitRule,
    TreeConfig,
    build_rp_forest,
    build_tree,
    comprehensive_nns,
    defeatist_nns,
    forest_nns,
    load_tree,
    save_tree,
)

__version__ = "0.1.0"
