"""Intent-matching customer service chatbot with a rule-based NLU core,
context-driven dialog flows, spreadsheet-style order export, and
Messenger/Twilio-compatible webhook surfaces."""

from .bundle import (
    AgentBundle,
    BundleParseError,
    BundleSchemaError,
    load_bundle,
    serialize_bundle,
    validate_bundle,
)
from .commerce import (
    BusinessInfo,
    Cart,
    CartLine,
    Catalog,
    CsvSheetStore,
    CustomerDetails,
    FaqKb,
    OrderRecord,
    Product,
    faq_answer,
    find_products,
    is_open_at,
    resolve_product,
)
from .dialog import BotReply, DialogEngine, Session, SessionRegistry
from .fixtures import fixture_bundle, fixture_business, fixture_catalog, fixture_faq
from .nlu import (
    FALLBACK_INTENT,
    EntityMatch,
    IntentMatch,
    Utterance,
    classify,
    detect_unsupported_language,
    edit_distance,
    extract_entities,
    normalize,
    score_phrase,
    similarity,
)

__version__ = "0.1.0"
