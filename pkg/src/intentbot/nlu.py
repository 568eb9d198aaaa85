"""Stateless text understanding: normalization, fuzzy entity extraction,
and training-phrase intent classification.

Everything in this module is a pure function of its arguments, so results
are reproducible across calls, threads, and process restarts.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

# Returned by classify() when no intent clears the confidence threshold.
FALLBACK_INTENT = "FALLBACK"

NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
    "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20,
}

DATETIME_WORDS = (
    "now", "today", "tomorrow", "tonight",
    "monday", "tuesday", "wednesday", "thursday", "friday",
    "saturday", "sunday",
)

_WORD_RUN = re.compile(r"[^\W_]+(?:['’][^\W_]+)*", re.UNICODE)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Utterance:
    raw: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class EntityMatch:
    entity_type: str
    canonical: str
    surface: str
    span: tuple[int, int]  # token index range, half-open
    similarity: float


@dataclass(frozen=True)
class IntentMatch:
    intent: str  # intent name or FALLBACK_INTENT
    sub_agent: str | None
    confidence: float
    params: dict = field(default_factory=dict)  # parameter name -> EntityMatch


def normalize(text: str) -> Utterance:
    """Lowercase and split on whitespace/punctuation; apostrophes are removed,
    not split ("don't" -> "dont"). Token offsets index the original string."""
    tokens = []
    for m in _WORD_RUN.finditer(text):
        cleaned = m.group().replace("'", "").replace("’", "").lower()
        if cleaned:
            tokens.append(Token(cleaned, m.start(), m.end()))
    return Utterance(raw=text, tokens=tuple(tokens))


def edit_distance(a: str, b: str) -> int:
    """Damerau-Levenshtein distance (insert, delete, substitute, adjacent
    transposition) on the lowercased forms."""
    a = a.lower()
    b = b.lower()
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev2 = None
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                best = min(best, prev2[j - 2] + 1)
            cur[j] = best
        prev2, prev = prev, cur
    return prev[lb]


def similarity(a: str, b: str) -> float:
    """Normalized edit similarity: 1 - distance / max length, in [0, 1].
    Both strings empty counts as identical (1.0)."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


def stem(token: str) -> str:
    """Light suffix stemmer used symmetrically on both sides of phrase
    scoring, so "closing hours" and "when do you close" share a stem.

    Tokens shorter than 5 characters pass through unchanged. Suffix rules,
    first match wins: -ies -> -y, strip -ing, strip -es, strip -s (but not
    -ss); afterwards a trailing -e is dropped from stems still >= 5 chars.
    """
    if len(token) < 5:
        return token
    if token.endswith("ies"):
        token = token[:-3] + "y"
    elif token.endswith("ing"):
        token = token[:-3]
    elif token.endswith("es"):
        token = token[:-2]
    elif token.endswith("s") and not token.endswith("ss"):
        token = token[:-1]
    if len(token) >= 5 and token.endswith("e"):
        token = token[:-1]
    return token


def _synonym_key(text: str) -> str:
    """Canonical comparison form for entity synonyms: normalized tokens
    joined without separators ("Apple Juice" -> "applejuice")."""
    return "".join(t.text for t in normalize(text).tokens)


def _entity_keys(entity_type) -> list[tuple[str, str]]:
    """(comparison key, canonical value) pairs for one entity type. The
    canonical value counts as its own synonym."""
    pairs = []
    for entry in entity_type.entries:
        seen = set()
        for form in (entry.value, *entry.synonyms):
            key = _synonym_key(form)
            if key and key not in seen:
                seen.add(key)
                pairs.append((key, entry.value))
    return pairs


def extract_entities(utt: Utterance, entity_types, fuzzy_threshold: float) -> list[EntityMatch]:
    """Slide token windows over the utterance and match them against entity
    synonyms (exact -> 1.0, else fuzzy when the type allows it). Overlaps are
    resolved by higher similarity, then longer span, then leftmost position.

    System types are algorithmic: `number` accepts digit tokens and the words
    one..twenty, `datetime-word` accepts a fixed word list.
    """
    tokens = utt.tokens
    if not tokens:
        return []

    candidates = []  # (similarity, width, start, type name, canonical)
    custom = []
    for et in sorted(entity_types, key=lambda e: e.name):
        if et.kind == "system":
            if et.name == "number":
                for i, tok in enumerate(tokens):
                    if tok.text.isdigit():
                        candidates.append((1.0, 1, i, et.name, str(int(tok.text))))
                    elif tok.text in NUMBER_WORDS:
                        candidates.append((1.0, 1, i, et.name, str(NUMBER_WORDS[tok.text])))
            elif et.name == "datetime-word":
                for i, tok in enumerate(tokens):
                    if tok.text in DATETIME_WORDS:
                        candidates.append((1.0, 1, i, et.name, tok.text))
        else:
            custom.append((et, _entity_keys(et)))

    max_width = 1
    for et, _ in custom:
        for entry in et.entries:
            for form in (entry.value, *entry.synonyms):
                max_width = max(max_width, len(normalize(form).tokens))

    for width in range(1, min(max_width, len(tokens)) + 1):
        for start in range(0, len(tokens) - width + 1):
            window = "".join(t.text for t in tokens[start:start + width])
            for et, pairs in custom:
                for key, canonical in pairs:
                    if window == key:
                        candidates.append((1.0, width, start, et.name, canonical))
                    elif et.fuzzy_enabled:
                        # length pre-check: distance >= |len diff|
                        longest = max(len(window), len(key))
                        if longest and abs(len(window) - len(key)) / longest <= 1.0 - fuzzy_threshold:
                            sim = similarity(window, key)
                            if sim >= fuzzy_threshold:
                                candidates.append((sim, width, start, et.name, canonical))

    # higher similarity first, then longer span, then leftmost; remaining
    # keys make the ordering fully deterministic
    candidates.sort(key=lambda c: (-c[0], -c[1], c[2], c[3], c[4]))
    accepted: list[EntityMatch] = []
    taken = [False] * len(tokens)
    for sim, width, start, type_name, canonical in candidates:
        if any(taken[start:start + width]):
            continue
        for i in range(start, start + width):
            taken[i] = True
        surface = utt.raw[tokens[start].start:tokens[start + width - 1].end]
        accepted.append(EntityMatch(type_name, canonical, surface, (start, start + width), sim))
    accepted.sort(key=lambda m: m.span[0])
    return accepted


def _abstract_utterance(utt: Utterance, entities: list[EntityMatch]) -> list:
    """Token multiset of the utterance with entity spans collapsed into
    slot markers and the remaining literals stemmed."""
    by_start = {m.span[0]: m for m in entities}
    out = []
    i = 0
    while i < len(utt.tokens):
        m = by_start.get(i)
        if m is not None:
            out.append(("slot", m.entity_type))
            i = m.span[1]
        else:
            out.append(stem(utt.tokens[i].text))
            i += 1
    return out


def _abstract_phrase(phrase) -> list:
    """Training phrase as the same token alphabet: explicit slots become
    slot markers, literal parts are normalized and stemmed."""
    out = []
    for part in phrase.parts:
        if part.slot is not None:
            out.append(("slot", part.slot))
        else:
            out.extend(stem(t.text) for t in normalize(part.text).tokens)
    return out


def score_phrase(utt: Utterance, phrase, entities: list[EntityMatch]) -> float:
    """Token-multiset F1 between the slot-abstracted utterance and the
    slot-abstracted training phrase; slot markers only overlap when their
    entity types match. Either side empty scores 0."""
    a = _abstract_utterance(utt, entities)
    b = _abstract_phrase(phrase)
    if not a or not b:
        return 0.0
    overlap = sum((Counter(a) & Counter(b)).values())
    return 2.0 * overlap / (len(a) + len(b))


def classify(utt: Utterance, bundle, active_contexts=()) -> IntentMatch:
    """Pick the best intent for an utterance.

    Intents are eligible when all their input contexts are active (intents
    without input contexts always are). Confidence is the best score over an
    intent's training phrases; ties prefer more required parameters filled by
    extracted entities, then the lexicographically smaller intent name. Below
    the bundle's confidence threshold the fallback sentinel is returned with
    the raw best score.
    """
    active = set(active_contexts)
    entities = extract_entities(utt, bundle.entity_types, bundle.config.fuzzy_threshold)

    scored = []
    for sub_agent in bundle.sub_agents:
        for intent in sub_agent.intents:
            if not set(intent.input_contexts) <= active:
                continue
            confidence = max(score_phrase(utt, p, entities) for p in intent.training_phrases)
            filled = sum(
                1 for p in intent.parameters
                if p.required and any(m.entity_type == p.entity_type for m in entities)
            )
            scored.append((confidence, filled, intent.name, sub_agent.name, intent))

    if not scored:
        return IntentMatch(FALLBACK_INTENT, None, 0.0, {})

    scored.sort(key=lambda s: (-s[0], -s[1], s[2]))
    confidence, _, name, sub_agent_name, intent = scored[0]
    if confidence < bundle.config.confidence_threshold:
        return IntentMatch(FALLBACK_INTENT, None, confidence, {})

    params = {}
    for p in intent.parameters:
        for m in entities:  # entities are in utterance order: leftmost wins
            if m.entity_type == p.entity_type:
                params[p.name] = m
                break
    return IntentMatch(name, sub_agent_name, confidence, params)


def detect_unsupported_language(text: str) -> bool:
    """True when >= 60% of the alphabetic characters fall outside Basic
    Latin. Strings with no alphabetic characters count as supported."""
    alpha = [c for c in text if c.isalpha()]
    if not alpha:
        return False
    outside = sum(1 for c in alpha if ord(c) > 127)
    return outside / len(alpha) >= 0.6
