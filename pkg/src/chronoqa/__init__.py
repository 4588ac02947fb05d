"""Time-sensitive QA benchmark generation and evaluation over temporal tables."""

from .allen import (
    AllenRelation,
    ReferenceInterval,
    RelationTag,
    SamplerConfig,
    classify,
    condition_for,
    criteria_for,
    holds,
    sample_reference,
)
from .errors import ChronoqaError
from .evaluate import (
    EvalConfig,
    ScoreRecord,
    aggregate,
    extract_dates,
    score_answer,
    score_hops,
    score_time,
)
from .gateway import ChatRequest, Gateway, ProviderConfig
from .manifest import RunManifest, bundled_fixture_manifest, load_manifest
from .qagen import QAItem, build_context, classify_cardinality, gen_multihop, genqueries
from .query import QueryAst, execute, parse_sql, print_sql, strip_temporal
from .store import (
    TemporalRelation,
    TFDecl,
    check_tfd,
    infer_joined_tfd,
    load_relation,
    load_relation_csv,
    temporal_natural_join,
    timeslice,
)
from .timepoints import Duration, Granularity, Interval, TimePoint

__version__ = "0.1.0"

__all__ = [
    "AllenRelation",
    "ChatRequest",
    "ChronoqaError",
    "Duration",
    "EvalConfig",
    "Gateway",
    "Granularity",
    "Interval",
    "ProviderConfig",
    "QAItem",
    "QueryAst",
    "ReferenceInterval",
    "RelationTag",
    "RunManifest",
    "SamplerConfig",
    "ScoreRecord",
    "TFDecl",
    "TemporalRelation",
    "TimePoint",
    "aggregate",
    "build_context",
    "bundled_fixture_manifest",
    "check_tfd",
    "classify",
    "classify_cardinality",
    "condition_for",
    "criteria_for",
    "execute",
    "extract_dates",
    "gen_multihop",
    "genqueries",
    "holds",
    "infer_joined_tfd",
    "load_manifest",
    "load_relation",
    "load_relation_csv",
    "parse_sql",
    "print_sql",
    "sample_reference",
    "score_answer",
    "score_hops",
    "score_time",
    "strip_temporal",
    "temporal_natural_join",
    "timeslice",
]
