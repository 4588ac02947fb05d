"""Run manifests: dataset declarations, sampler, question, provider, eval config.

A manifest is one JSON document describing everything a run needs.
Relative CSV paths resolve against the manifest's own directory. Seeds
must be explicit; nothing falls back to wall-clock time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .allen import RelationTag, SamplerConfig
from .errors import ManifestError
from .evaluate import DEFAULT_NO_ANSWER_MARKERS, EvalConfig
from .gateway import ProviderConfig
from .qagen import HopSpec, JoinSpec, QuestionSettings
from .store import AttributeSchema, TFDecl, TemporalRelation, load_relation_csv
from .timepoints import Granularity


@dataclass
class RelationDecl:
    name: str
    csv_path: Path
    schema: list[AttributeSchema]
    start_attr: str
    end_attr: str
    granularity: Granularity
    tfds: list[TFDecl]
    answer_extensions: tuple[str, ...] = ()
    templates: dict[str, str] = field(default_factory=dict)

    def load(self) -> TemporalRelation:
        if not self.csv_path.exists():
            raise ManifestError(f"relation {self.name}: csv file {self.csv_path} does not exist")
        return load_relation_csv(
            self.name, self.schema, self.start_attr, self.end_attr,
            self.granularity, self.csv_path, self.tfds,
        )


@dataclass
class RunManifest:
    path: Path
    seed: int
    relations: list[RelationDecl]
    joins: list[JoinSpec]
    sampler: SamplerConfig
    question: QuestionSettings
    providers: dict[str, ProviderConfig]
    evaluation: EvalConfig
    paper_literal: bool = False
    context_rows: int = 2

    def relation(self, name: str) -> RelationDecl:
        for decl in self.relations:
            if decl.name == name:
                return decl
        raise ManifestError(f"manifest declares no relation named {name!r}")

    def provider(self, name: str) -> ProviderConfig:
        if name not in self.providers:
            known = ", ".join(sorted(self.providers)) or "(none)"
            raise ManifestError(f"unknown provider {name!r}; configured: {known}")
        return self.providers[name]

    def load_all(self) -> dict[str, TemporalRelation]:
        return {decl.name: decl.load() for decl in self.relations}


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ManifestError(f"{where}: missing required key {key!r}")
    return obj[key]


def _parse_tfd(obj: dict, where: str) -> TFDecl:
    return TFDecl(
        lhs=tuple(_require(obj, "lhs", where)),
        rhs=tuple(_require(obj, "rhs", where)),
        temporal=bool(obj.get("temporal", True)),
    )


def _parse_relation(obj: dict, base: Path) -> RelationDecl:
    name = _require(obj, "name", "relation")
    where = f"relation {name}"
    attributes = [
        AttributeSchema(name=_require(a, "name", where), kind=a.get("kind", "text"))
        for a in _require(obj, "attributes", where)
    ]
    try:
        granularity = Granularity(_require(obj, "granularity", where))
    except ValueError as exc:
        raise ManifestError(f"{where}: {exc}") from exc
    return RelationDecl(
        name=name,
        csv_path=(base / _require(obj, "csv", where)).resolve(),
        schema=attributes,
        start_attr=_require(obj, "start_attr", where),
        end_attr=_require(obj, "end_attr", where),
        granularity=granularity,
        tfds=[_parse_tfd(t, where) for t in obj.get("tfds", [])],
        answer_extensions=tuple(obj.get("answer_extensions", [])),
        templates=dict(obj.get("templates", {})),
    )


def _parse_join(obj: dict) -> JoinSpec:
    name = _require(obj, "name", "join")
    where = f"join {name}"
    hops = tuple(
        HopSpec(attrs=tuple(_require(h, "attrs", where)), description=h.get("description", ""))
        for h in obj.get("hops", [])
    )
    try:
        relations = tuple(RelationTag.parse(r) for r in obj.get("relations", []))
    except ValueError as exc:
        raise ManifestError(f"{where}: {exc}") from exc
    return JoinSpec(
        name=name,
        left=_require(obj, "left", where),
        right=_require(obj, "right", where),
        fd=_parse_tfd(_require(obj, "fd", where), where),
        tfd=_parse_tfd(_require(obj, "tfd", where), where),
        relations=relations,
        include_base=bool(obj.get("include_base", True)),
        hops=hops,
        template=obj.get("template"),
    )


def _parse_ranges(obj: dict, where: str) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    for unit, bounds in obj.items():
        if unit not in ("day", "month", "year") or len(bounds) != 2:
            raise ManifestError(f"{where}: bad range for unit {unit!r}")
        lo, hi = int(bounds[0]), int(bounds[1])
        if lo < 1 or hi < lo:
            raise ManifestError(f"{where}: range for {unit} must satisfy 1 <= lo <= hi")
        out[unit] = (lo, hi)
    return out


def _parse_sampler(obj: dict) -> SamplerConfig:
    allowed = obj.get("relations")
    return SamplerConfig(
        offsets=_parse_ranges(_require(obj, "offsets", "sampler"), "sampler.offsets"),
        lengths=_parse_ranges(_require(obj, "lengths", "sampler"), "sampler.lengths"),
        miss_probability=float(obj.get("miss_probability", 0.0)),
        allowed_relations=tuple(allowed) if allowed else None,
    )


def _parse_question(obj: dict) -> QuestionSettings:
    return QuestionSettings(
        mode=obj.get("mode", "template"),
        paraphrases=int(obj.get("paraphrases", 3)),
        templates=dict(obj.get("templates", {})),
    )


def _parse_provider(obj: dict) -> ProviderConfig:
    name = _require(obj, "name", "provider")
    where = f"provider {name}"
    return ProviderConfig(
        name=name,
        base_url=_require(obj, "base_url", where),
        model=_require(obj, "model", where),
        credential_env=obj.get("credential_env", ""),
        max_concurrency=int(obj.get("max_concurrency", 4)),
    )


def _parse_eval(obj: dict) -> EvalConfig:
    markers = obj.get("no_answer_markers")
    granularity = {k: str(v) for k, v in obj.get("granularity", {}).items()}
    for dataset, value in granularity.items():
        try:
            Granularity(value)
        except ValueError as exc:
            raise ManifestError(f"evaluation.granularity[{dataset}]: {exc}") from exc
    return EvalConfig(
        aliases={k: list(v) for k, v in obj.get("aliases", {}).items()},
        no_answer_markers=tuple(markers) if markers else DEFAULT_NO_ANSWER_MARKERS,
        granularity_override=granularity,
        strict_time=bool(obj.get("strict_time", False)),
    )


def load_manifest(path: str | Path, seed_override: int | None = None) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    base = path.parent
    seed = seed_override if seed_override is not None else data.get("seed")
    if seed is None:
        raise ManifestError("manifest declares no seed and none was passed; seeds must be explicit")
    relations = [_parse_relation(r, base) for r in _require(data, "relations", "manifest")]
    providers = {}
    for entry in data.get("providers", []):
        provider = _parse_provider(entry)
        providers[provider.name] = provider
    return RunManifest(
        path=path,
        seed=int(seed),
        relations=relations,
        joins=[_parse_join(j) for j in data.get("joins", [])],
        sampler=_parse_sampler(_require(data, "sampler", "manifest")),
        question=_parse_question(data.get("question", {})),
        providers=providers,
        evaluation=_parse_eval(data.get("evaluation", {})),
        paper_literal=bool(data.get("paper_literal", False)),
        context_rows=int(data.get("context_rows", 2)),
    )


def bundled_fixture_manifest() -> Path:
    """Path of the manifest shipped with the package fixtures."""
    return Path(__file__).parent / "fixtures" / "manifest.json"
