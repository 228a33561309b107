from .branch_graph import BranchGraph, BranchNode, ValidityReport, build_branch_graph, is_valid
from .catalog import NamedProcess, get_process, list_processes
from .errors import (
    AlphabetMismatch,
    AmbiguousArrow,
    ArrowCollision,
    ConfigurationError,
    DimMismatch,
    InvalidBifurcation,
    InvalidGraph,
    InvalidRelation,
    InvalidSpec,
    InvalidValue,
    MissingDim,
    NontrivialOpenArrow,
    NotBiunivocal,
    NotBranched,
    NotIsometryFleshing,
    NotSplittable,
    NotUnivocal,
    OneDimViolation,
    OutOfDomain,
    PreconditionFailed,
    RoutedQcError,
    ShapeMismatch,
    SpaceMismatch,
    UncoveredNode,
    UnknownProcess,
)
from .generic import (
    FleshingOut,
    SkeletalSupermap,
    compose_fleshed,
    flesh_out,
    generic_graph,
    qcqc_dimensions,
    skeletal,
)
from .pipeline import VerificationResult, apply_pipeline, load_process, verify_equivalence
from .qcqc import OpKey, ProcessVector, QcqcSpec, process_vector, validate_spec
from .relation import NULL, AgentSet, Atom, Composite, Port, Relation
from .routed_graph import Arrow, ChoiceFunction, RoutedGraph, choice_function, find_isomorphism
from .tensor import ChoiTensor, SectoredSpace, SectorTensor, link_product
from .transform import (
    MergeDirection,
    TransformLog,
    alpha_variant,
    local_graph,
    merge_nodes,
    remove_arrows,
    split_graph,
    split_node,
)

__all__ = [
    "NULL",
    "AgentSet",
    "AlphabetMismatch",
    "AmbiguousArrow",
    "Arrow",
    "ArrowCollision",
    "Atom",
    "BranchGraph",
    "BranchNode",
    "ChoiTensor",
    "ChoiceFunction",
    "Composite",
    "ConfigurationError",
    "DimMismatch",
    "FleshingOut",
    "InvalidBifurcation",
    "InvalidGraph",
    "InvalidRelation",
    "InvalidSpec",
    "InvalidValue",
    "MergeDirection",
    "MissingDim",
    "NamedProcess",
    "NontrivialOpenArrow",
    "NotBiunivocal",
    "NotBranched",
    "NotIsometryFleshing",
    "NotSplittable",
    "NotUnivocal",
    "OneDimViolation",
    "OpKey",
    "OutOfDomain",
    "Port",
    "PreconditionFailed",
    "ProcessVector",
    "QcqcSpec",
    "Relation",
    "RoutedGraph",
    "RoutedQcError",
    "SectorTensor",
    "SectoredSpace",
    "ShapeMismatch",
    "SkeletalSupermap",
    "SpaceMismatch",
    "TransformLog",
    "UncoveredNode",
    "UnknownProcess",
    "ValidityReport",
    "VerificationResult",
    "alpha_variant",
    "apply_pipeline",
    "build_branch_graph",
    "choice_function",
    "compose_fleshed",
    "find_isomorphism",
    "flesh_out",
    "generic_graph",
    "get_process",
    "is_valid",
    "link_product",
    "list_processes",
    "load_process",
    "local_graph",
    "merge_nodes",
    "process_vector",
    "qcqc_dimensions",
    "remove_arrows",
    "skeletal",
    "split_graph",
    "split_node",
    "validate_spec",
    "verify_equivalence",
]
