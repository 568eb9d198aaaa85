"""Declarative agent bundle: sub-agents, intents, training phrases, entity
types, fallback replies, and engine configuration, loaded from a JSON file.

Bundles are immutable after load and safe to share between threads.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

SYSTEM_ENTITY_KINDS = ("number", "datetime-word")

TOP_LEVEL_KEYS = {"name", "config", "fallback", "entityTypes", "subAgents"}
CONFIG_KEYS = {
    "confidenceThreshold", "fuzzyThreshold", "repromptLimit",
    "spamBurstCount", "spamBurstWindowSeconds", "spamRepeatCount", "randomSeed",
}
INTENT_KEYS = {
    "name", "action", "trainingPhrases", "parameters",
    "inputContexts", "outputContexts", "responses",
}
ENTITY_KEYS = {"name", "kind", "fuzzyEnabled", "entries"}


class BundleError(Exception):
    """Base class for bundle loading failures."""


class BundleParseError(BundleError):
    """The document is not well-formed JSON."""

    def __init__(self, path, line, column, message):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path = path
        self.line = line
        self.column = column


class BundleSchemaError(BundleError):
    """The document is JSON but misses required structure."""

    def __init__(self, location, message):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass(frozen=True)
class EngineConfig:
    confidence_threshold: float = 0.6
    fuzzy_threshold: float = 0.8
    reprompt_limit: int = 3
    spam_burst_count: int = 5
    spam_burst_window_seconds: float = 3.0
    spam_repeat_count: int = 4
    random_seed: int | None = None


@dataclass(frozen=True)
class EntityEntry:
    value: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True)
class EntityTypeDef:
    name: str
    kind: str = "custom"  # "custom" or "system"
    fuzzy_enabled: bool = False
    entries: tuple[EntityEntry, ...] = ()


@dataclass(frozen=True)
class PhrasePart:
    """Either a literal chunk of text or a typed slot, never both."""
    text: str = ""
    slot: str | None = None


@dataclass(frozen=True)
class TrainingPhrase:
    parts: tuple[PhrasePart, ...]


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    entity_type: str
    required: bool = False
    reprompt: str = ""


@dataclass(frozen=True)
class Intent:
    name: str
    action: str
    training_phrases: tuple[TrainingPhrase, ...]
    responses: tuple[str, ...]
    parameters: tuple[ParameterSpec, ...] = ()
    input_contexts: tuple[str, ...] = ()
    output_contexts: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class SubAgent:
    name: str
    intents: tuple[Intent, ...]


@dataclass(frozen=True)
class FallbackSpec:
    replies: tuple[str, ...]


@dataclass(frozen=True)
class AgentBundle:
    name: str
    sub_agents: tuple[SubAgent, ...]
    entity_types: tuple[EntityTypeDef, ...]
    fallback: FallbackSpec
    config: EngineConfig
    # unknown file keys noticed at load time; surfaced by validate_bundle,
    # ignored for equality so round-trips compare on the resolved form only
    unknown_keys: tuple = field(default=(), compare=False)

    def entity_type(self, name: str) -> EntityTypeDef | None:
        for et in self.entity_types:
            if et.name == name:
                return et
        return None

    def intents(self):
        for sa in self.sub_agents:
            yield from sa.intents


@dataclass(frozen=True)
class Finding:
    kind: str
    location: str
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.location}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def add(self, kind, location, message):
        self.findings.append(Finding(kind, location, message))

    @property
    def ok(self) -> bool:
        return not self.findings


def _require(obj, key, kind, location):
    if not isinstance(obj, dict) or key not in obj:
        raise BundleSchemaError(location, f"missing required field '{key}'")
    value = obj[key]
    if not isinstance(value, kind):
        raise BundleSchemaError(location, f"field '{key}' has wrong type")
    return value


def _parse_phrase(raw, location) -> TrainingPhrase:
    if not isinstance(raw, list) or not raw:
        raise BundleSchemaError(location, "training phrase must be a non-empty list of parts")
    parts = []
    for part in raw:
        if isinstance(part, str):
            parts.append(PhrasePart(text=part))
        elif isinstance(part, dict) and isinstance(part.get("slot"), str):
            parts.append(PhrasePart(slot=part["slot"]))
        else:
            raise BundleSchemaError(location, f"bad phrase part: {part!r}")
    return TrainingPhrase(tuple(parts))


def _parse_intent(raw, location) -> Intent:
    name = _require(raw, "name", str, location)
    loc = f"{location}({name})"
    action = _require(raw, "action", str, loc)
    phrases = tuple(
        _parse_phrase(p, loc) for p in _require(raw, "trainingPhrases", list, loc)
    )
    responses = tuple(_require(raw, "responses", list, loc))
    if not phrases:
        raise BundleSchemaError(loc, "intent needs at least one training phrase")
    if not responses or not all(isinstance(r, str) for r in responses):
        raise BundleSchemaError(loc, "intent needs at least one response text")
    parameters = tuple(
        ParameterSpec(
            name=_require(p, "name", str, loc),
            entity_type=_require(p, "entityType", str, loc),
            required=bool(p.get("required", False)),
            reprompt=str(p.get("reprompt", "")),
        )
        for p in raw.get("parameters", [])
    )
    output_contexts = []
    for oc in raw.get("outputContexts", []):
        ctx_name = _require(oc, "name", str, loc)
        lifespan = _require(oc, "lifespan", int, loc)
        if lifespan < 1:
            raise BundleSchemaError(loc, "context lifespan must be >= 1")
        output_contexts.append((ctx_name, lifespan))
    return Intent(
        name=name,
        action=action,
        training_phrases=phrases,
        responses=responses,
        parameters=parameters,
        input_contexts=tuple(raw.get("inputContexts", [])),
        output_contexts=tuple(output_contexts),
    )


def _parse_entity(raw, location) -> EntityTypeDef:
    name = _require(raw, "name", str, location)
    loc = f"{location}({name})"
    kind = raw.get("kind", "custom")
    if kind not in ("custom", "system"):
        raise BundleSchemaError(loc, f"unknown entity kind {kind!r}")
    entries = tuple(
        EntityEntry(
            value=_require(e, "value", str, loc),
            synonyms=tuple(e.get("synonyms", [])),
        )
        for e in raw.get("entries", [])
    )
    return EntityTypeDef(
        name=name,
        kind=kind,
        fuzzy_enabled=bool(raw.get("fuzzyEnabled", False)),
        entries=entries,
    )


def _collect_unknown_keys(doc) -> tuple:
    findings = []

    def check(obj, allowed, location):
        if not isinstance(obj, dict):
            return
        for key in obj:
            if key not in allowed:
                findings.append(Finding("unknown-key", location, f"unknown key '{key}'"))

    check(doc, TOP_LEVEL_KEYS, "bundle")
    check(doc.get("config", {}), CONFIG_KEYS, "config")
    for e in doc.get("entityTypes", []):
        if isinstance(e, dict):
            check(e, ENTITY_KEYS, f"entityTypes({e.get('name', '?')})")
    for sa in doc.get("subAgents", []):
        if not isinstance(sa, dict):
            continue
        check(sa, {"name", "intents"}, f"subAgents({sa.get('name', '?')})")
        for i in sa.get("intents", []):
            if isinstance(i, dict):
                check(i, INTENT_KEYS, f"intent({i.get('name', '?')})")
    return tuple(findings)


def load_bundle_dict(doc: dict, source: str = "<bundle>") -> AgentBundle:
    """Build a resolved AgentBundle from a decoded JSON document, applying
    config defaults. Raises BundleSchemaError on missing structure."""
    name = _require(doc, "name", str, source)
    raw_config = doc.get("config", {})
    if not isinstance(raw_config, dict):
        raise BundleSchemaError(source, "field 'config' has wrong type")
    config = EngineConfig(
        confidence_threshold=float(raw_config.get("confidenceThreshold", 0.6)),
        fuzzy_threshold=float(raw_config.get("fuzzyThreshold", 0.8)),
        reprompt_limit=int(raw_config.get("repromptLimit", 3)),
        spam_burst_count=int(raw_config.get("spamBurstCount", 5)),
        spam_burst_window_seconds=float(raw_config.get("spamBurstWindowSeconds", 3.0)),
        spam_repeat_count=int(raw_config.get("spamRepeatCount", 4)),
        random_seed=raw_config.get("randomSeed"),
    )
    fallback_raw = _require(doc, "fallback", dict, source)
    fallback = FallbackSpec(replies=tuple(_require(fallback_raw, "replies", list, source)))
    if not fallback.replies:
        raise BundleSchemaError(source, "fallback needs at least one reply")
    entity_types = tuple(
        _parse_entity(e, f"{source}/entityTypes") for e in doc.get("entityTypes", [])
    )
    sub_agents = []
    for sa in _require(doc, "subAgents", list, source):
        sa_name = _require(sa, "name", str, f"{source}/subAgents")
        intents = tuple(
            _parse_intent(i, f"{source}/{sa_name}")
            for i in _require(sa, "intents", list, f"{source}/{sa_name}")
        )
        if not intents:
            raise BundleSchemaError(f"{source}/{sa_name}", "sub-agent needs at least one intent")
        sub_agents.append(SubAgent(name=sa_name, intents=intents))
    return AgentBundle(
        name=name,
        sub_agents=tuple(sub_agents),
        entity_types=entity_types,
        fallback=fallback,
        config=config,
        unknown_keys=_collect_unknown_keys(doc),
    )


def load_bundle(path) -> AgentBundle:
    """Load and resolve a bundle file. Raises BundleParseError for malformed
    JSON (with line info) and BundleSchemaError for missing fields."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise BundleParseError(str(path), e.lineno, e.colno, e.msg) from e
    if not isinstance(doc, dict):
        raise BundleSchemaError(str(path), "top level must be a JSON object")
    return load_bundle_dict(doc, source=str(path))


_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def validate_bundle(bundle: AgentBundle) -> ValidationReport:
    """Semantic checks on a structurally loaded bundle. Findings are data,
    not failures; an empty report means the bundle is valid."""
    report = ValidationReport()
    report.findings.extend(bundle.unknown_keys)

    cfg = bundle.config
    if not 0.0 <= cfg.confidence_threshold <= 1.0:
        report.add("config-range", "config", "confidenceThreshold must lie in [0, 1]")
    if not 0.0 <= cfg.fuzzy_threshold <= 1.0:
        report.add("config-range", "config", "fuzzyThreshold must lie in [0, 1]")
    if cfg.reprompt_limit < 1:
        report.add("config-range", "config", "repromptLimit must be >= 1")
    if cfg.spam_burst_count < 1 or cfg.spam_repeat_count < 1:
        report.add("config-range", "config", "spam limits must be >= 1")

    entity_names = {et.name for et in bundle.entity_types}

    seen_agents = set()
    for sa in bundle.sub_agents:
        if sa.name in seen_agents:
            report.add("duplicate-subagent", sa.name, "sub-agent name used more than once")
        seen_agents.add(sa.name)

    seen_intents = set()
    for sa in bundle.sub_agents:
        for intent in sa.intents:
            loc = f"{sa.name}/{intent.name}"
            if intent.name in seen_intents:
                report.add("duplicate-intent", loc, "intent name used more than once")
            seen_intents.add(intent.name)
            param_names = {p.name for p in intent.parameters}
            for p in intent.parameters:
                if p.entity_type not in entity_names:
                    report.add("dangling-entity", loc,
                               f"parameter '{p.name}' references undefined entity '{p.entity_type}'")
                if p.required and not p.reprompt.strip():
                    report.add("missing-reprompt", loc,
                               f"required parameter '{p.name}' has no reprompt text")
            for phrase in intent.training_phrases:
                for part in phrase.parts:
                    if part.slot is not None and part.slot not in entity_names:
                        report.add("dangling-entity", loc,
                                   f"training phrase slot references undefined entity '{part.slot}'")
            for response in intent.responses:
                for placeholder in _PLACEHOLDER.findall(response):
                    if placeholder not in param_names:
                        report.add("unknown-placeholder", loc,
                                   f"response placeholder '{{{placeholder}}}' names no parameter")

    for et in bundle.entity_types:
        if et.kind == "system":
            if et.name not in SYSTEM_ENTITY_KINDS:
                report.add("unknown-system-entity", et.name,
                           f"system entity must be one of {SYSTEM_ENTITY_KINDS}")
            if et.entries:
                report.add("system-entries", et.name,
                           "system entity types carry no entries")
            continue
        seen_values = set()
        synonym_owner = {}
        for entry in et.entries:
            if entry.value in seen_values:
                report.add("duplicate-canonical", et.name,
                           f"canonical value '{entry.value}' repeated")
            seen_values.add(entry.value)
            for syn in (entry.value, *entry.synonyms):
                key = syn.lower()
                owner = synonym_owner.get(key)
                if owner is not None and owner != entry.value:
                    report.add("duplicate-synonym", et.name,
                               f"synonym '{syn}' maps to both '{owner}' and '{entry.value}'")
                synonym_owner[key] = entry.value

    return report


def serialize_bundle(bundle: AgentBundle) -> dict:
    """Resolved bundle as a JSON-compatible dict; load_bundle_dict of the
    result reproduces an equal bundle (round-trip identity)."""
    def phrase_json(phrase):
        return [
            {"slot": p.slot} if p.slot is not None else p.text
            for p in phrase.parts
        ]

    doc = {
        "name": bundle.name,
        "config": {
            "confidenceThreshold": bundle.config.confidence_threshold,
            "fuzzyThreshold": bundle.config.fuzzy_threshold,
            "repromptLimit": bundle.config.reprompt_limit,
            "spamBurstCount": bundle.config.spam_burst_count,
            "spamBurstWindowSeconds": bundle.config.spam_burst_window_seconds,
            "spamRepeatCount": bundle.config.spam_repeat_count,
        },
        "fallback": {"replies": list(bundle.fallback.replies)},
        "entityTypes": [
            {
                "name": et.name,
                "kind": et.kind,
                "fuzzyEnabled": et.fuzzy_enabled,
                "entries": [
                    {"value": e.value, "synonyms": list(e.synonyms)} for e in et.entries
                ],
            }
            for et in bundle.entity_types
        ],
        "subAgents": [
            {
                "name": sa.name,
                "intents": [
                    {
                        "name": i.name,
                        "action": i.action,
                        "trainingPhrases": [phrase_json(p) for p in i.training_phrases],
                        "parameters": [
                            {
                                "name": p.name,
                                "entityType": p.entity_type,
                                "required": p.required,
                                "reprompt": p.reprompt,
                            }
                            for p in i.parameters
                        ],
                        "inputContexts": list(i.input_contexts),
                        "outputContexts": [
                            {"name": n, "lifespan": l} for n, l in i.output_contexts
                        ],
                        "responses": list(i.responses),
                    }
                    for i in sa.intents
                ],
            }
            for sa in bundle.sub_agents
        ],
    }
    if bundle.config.random_seed is not None:
        doc["config"]["randomSeed"] = bundle.config.random_seed
    return doc
