"""Conversation engine: owns sessions, applies classification, manages
contexts and slot filling, runs the order/confirmation/checkout flows, and
enforces the loop, spam, and language guards.

Messages for one session are handled strictly in arrival order (callers hold
the per-session lock from SessionRegistry); distinct sessions may run in
parallel. Replies draw response variants from a per-session seeded RNG, so a
session's transcript is a deterministic function of its inputs regardless of
how sessions interleave.
"""
from __future__ import annotations

import copy
import hashlib
import logging
import random
import threading
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from datetime import datetime

from .bundle import AgentBundle
from .commerce import (
    Cart,
    Catalog,
    CustomerDetails,
    FaqKb,
    BusinessInfo,
    SheetStoreError,
    WEEKDAYS,
    faq_answer,
    find_products,
    is_open_at,
    resolve_product,
    valid_phone,
)
from . import nlu
from .nlu import FALLBACK_INTENT, classify, detect_unsupported_language, normalize

log = logging.getLogger("intentbot.dialog")

ACTIVE = "active"
TERMINATED = "terminated"

CONFIRM_CONTEXT = "awaiting-item-confirmation"
PERSONAL_INFO_CONTEXT = "collecting-personal-info"

TERMINATED_COOLDOWN_SECONDS = 60.0

GREETING_REPLIES = [
    "Hello! I can help you find products, place an order, or answer questions about the shop.",
    "Hi there! Ask me about our products, place an order, or check our opening hours.",
    "Hey! What can I do for you today?",
]
GOODBYE_REPLIES = [
    "Thanks for stopping by — see you next time!",
    "Goodbye! Come back any time.",
]
TERMINATION_NOTICE = (
    "This conversation has been closed because spam was detected. "
    "Please try again later."
)
LANGUAGE_NOTICE = (
    "Sorry, I can only chat in English for now. Could you try again in English?"
)
ESCALATION_REPLIES = [
    "Let's set that aside for now — a colleague can help you if you need more. What else can I do for you?",
    "I couldn't work that out, so I've stopped asking. Is there anything else I can help with?",
]
REPEAT_PREFIX = "You've asked this already, but here it goes again:"
EMPTY_CART_REPLIES = [
    "Your cart is empty.",
    "There's nothing in your cart yet.",
]
EMPTY_CART_CHECKOUT = "Your cart is empty — tell me what you'd like to order first."
UNAVAILABLE_TEMPLATE = (
    "Sorry, {surface} isn't available in our shop. Would you like something else?"
)
CANCEL_MISS_TEMPLATE = "{product} isn't in your cart, so there's nothing to remove."
ORDER_RETRY_REPLY = (
    "Sorry — I couldn't save your order just now. Your cart is untouched; "
    "please try checking out again in a moment."
)
FIND_FILTER_PROMPT = "Tell me a brand or a category and I'll look it up for you."
SLOT_PROMPTS = {
    "name": "What name should the order be under?",
    "address": "What's the delivery address?",
    "phone": "And a contact phone number, please?",
}
SLOT_REPROMPTS = {
    "name": "I still need a name for the order — what should I put down?",
    "address": "I still need a delivery address — where should we deliver?",
    "phone": "That phone number doesn't look right — it needs at least 7 digits.",
}
CONFIRM_REPROMPT = "Should I add {quantity} x {product} to your cart? Please answer yes or no."

GREETING_ANCHORS = {"hello", "hi", "hey", "hiya", "howdy", "greetings", "yo"}
GREETING_FILLERS = {"there", "good", "morning", "afternoon", "evening", "day", "friend", "team", "all"}
GOODBYE_ANCHORS = {"bye", "goodbye", "farewell"}
GOODBYE_FILLERS = {"see", "you", "ya", "later", "thanks", "thank", "now", "then"}

ORDER_VERBS = {"want", "order", "buy", "get", "give", "add", "purchase", "take"}
ORDER_TAIL_STOPWORDS = {"to", "me", "the", "a", "an", "some", "please", "my", "of", "cart", "x", "pls"}
SLOT_FIELDS = ("name", "address", "phone")


@dataclass
class PendingItem:
    product: object
    quantity: int
    epoch: int
    reprompts: int = 0


@dataclass
class SlotState:
    name: str
    reprompts: int = 0


@dataclass
class BotReply:
    texts: list[str]
    quick_replies: list[str] | None = None
    cart_snapshot: list[dict] | None = None
    end_of_conversation: bool = False


@dataclass
class Session:
    id: str
    channel: str
    user_key: str
    contexts: dict = field(default_factory=dict)  # name -> remaining lifespan
    cart: Cart = field(default_factory=Cart)
    pending_item: PendingItem | None = None
    pending_slots: list[SlotState] | None = None
    customer: CustomerDetails = field(default_factory=CustomerDetails)
    recent: deque = field(default_factory=lambda: deque(maxlen=16))
    state: str = ACTIVE
    terminated_at: datetime | None = None
    repeat_count: int = 0
    pending_epoch: int = 0
    rng: random.Random = field(default_factory=random.Random)
    last_intent: str | None = None
    last_confidence: float = 0.0
    touched_contexts: set = field(default_factory=set)

    def activate_context(self, name: str, lifespan: int):
        self.contexts[name] = lifespan
        self.touched_contexts.add(name)

    def drop_context(self, name: str):
        self.contexts.pop(name, None)
        self.touched_contexts.discard(name)


def _session_seed(base_seed, user_key: str) -> int:
    # seeded per user but not per channel: the same user text sequence must
    # yield the same transcript on every channel
    digest = hashlib.sha256(f"{base_seed}|{user_key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _render(template: str, values: dict) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", str(value))
    return out


def _cart_snapshot(cart: Cart) -> list[dict]:
    return [
        {
            "product": line.product.name,
            "brand": line.product.brand,
            "category": line.product.category,
            "quantity": line.quantity,
        }
        for line in cart.lines
    ]


def _cart_lines_text(cart: Cart) -> list[str]:
    return [f"{line.quantity} x {line.product.name}" for line in cart.lines]


class DialogEngine:
    """Binds a bundle to the shop data and drives conversations."""

    def __init__(self, bundle: AgentBundle, catalog: Catalog, faq: FaqKb,
                 business: BusinessInfo, store):
        self.bundle = bundle
        self.catalog = catalog
        self.faq = faq
        self.business = business
        self.store = store
        self._actions = {
            "product.find": self.act_find_products,
            "order.take": self.act_order_taking,
            "order.confirm": self.act_item_confirm,
            "order.decline": self.act_item_decline,
            "cart.show": self.act_cart_check,
            "order.cancel": self.act_order_cancel,
            "checkout.start": self.act_personal_info,
            "faq.answer": self.act_faq,
            "info.hours": self.act_business_info,
            "info.contact": self.act_business_info,
            "info.location": self.act_business_info,
        }
        self._intent_by_name = {i.name: i for i in bundle.intents()}

    # -- session lifecycle ----------------------------------------------------

    def new_session(self, channel: str, user_key: str, session_id: str | None = None) -> Session:
        session = Session(
            id=session_id or uuid.uuid4().hex,
            channel=channel,
            user_key=user_key,
        )
        seed = _session_seed(self.bundle.config.random_seed, user_key)
        session.rng = random.Random(seed)
        return session

    def _reset_session(self, session: Session):
        fresh = self.new_session(session.channel, session.user_key, session_id=session.id)
        session.__dict__.update(fresh.__dict__)

    def _pick(self, session: Session, variants) -> str:
        return session.rng.choice(list(variants))

    # -- main entry point -------------------------------------------------------

    def handle_message(self, session: Session, text: str, now: datetime):
        """One conversation turn. Returns (session, reply); the session is
        mutated in place. Deterministic for a given (session state, text,
        now) because all randomness lives in the session's seeded RNG."""
        if session.state == TERMINATED:
            age = (now - session.terminated_at).total_seconds()
            if age < TERMINATED_COOLDOWN_SECONDS:
                return session, BotReply([TERMINATION_NOTICE], end_of_conversation=True)
            self._reset_session(session)

        utt = normalize(text)
        norm_text = " ".join(t.text for t in utt.tokens)

        if self.guard_spam(session, norm_text, now) == "terminate":
            session.state = TERMINATED
            session.terminated_at = now
            session.pending_item = None
            session.pending_slots = None
            session.contexts.clear()
            return session, BotReply([TERMINATION_NOTICE], end_of_conversation=True)

        repeated = (
            session.repeat_count >= 3
            and session.repeat_count < self.bundle.config.spam_repeat_count
        )

        session.touched_contexts = set()
        start_contexts = set(session.contexts)
        reply = self._dispatch(session, text, utt, now)
        self._decay_contexts(session, start_contexts)

        if repeated and not reply.end_of_conversation:
            reply.texts = [REPEAT_PREFIX] + reply.texts
        return session, reply

    # -- turn routing -----------------------------------------------------------

    def _dispatch(self, session: Session, text: str, utt, now: datetime) -> BotReply:
        if session.pending_slots:
            session.last_intent = None
            session.last_confidence = 0.0
            return self._slot_filling_turn(session, text, now)

        if detect_unsupported_language(text):
            session.last_intent = None
            session.last_confidence = 0.0
            if session.pending_item is not None:
                return self._confirm_sidestep(session, lambda: BotReply([LANGUAGE_NOTICE]))
            return BotReply([LANGUAGE_NOTICE])

        tokens = {t.text for t in utt.tokens}
        if tokens and tokens & GREETING_ANCHORS and tokens <= GREETING_ANCHORS | GREETING_FILLERS:
            session.last_intent = None
            session.last_confidence = 0.0
            if session.pending_item is not None:
                return self._confirm_sidestep(
                    session, lambda: BotReply([self._pick(session, GREETING_REPLIES)])
                )
            return BotReply([self._pick(session, GREETING_REPLIES)])
        if tokens and tokens & GOODBYE_ANCHORS and tokens <= GOODBYE_ANCHORS | GOODBYE_FILLERS:
            session.last_intent = None
            session.last_confidence = 0.0
            session.pending_item = None
            session.pending_slots = None
            session.drop_context(CONFIRM_CONTEXT)
            session.drop_context(PERSONAL_INFO_CONTEXT)
            return BotReply([self._pick(session, GOODBYE_REPLIES)], end_of_conversation=True)

        match = classify(utt, self.bundle, set(session.contexts))
        session.last_intent = match.intent
        session.last_confidence = match.confidence

        snapshot = copy.deepcopy(session)
        try:
            return self._dispatch_match(session, utt, match, now)
        except Exception:
            log.exception("handler failed for intent %s", match.intent)
            session.__dict__.update(snapshot.__dict__)
            return BotReply([self._pick(session, self.bundle.fallback.replies)])

    def _dispatch_match(self, session: Session, utt, match, now: datetime) -> BotReply:
        if session.pending_item is not None:
            resolving = {"order.confirm", "order.decline", "order.take"}
            intent = self._intent_by_name.get(match.intent)
            action = intent.action if intent else None
            if action not in resolving:
                informational = {"cart.show", "faq.answer", "info.hours", "info.contact",
                                 "info.location", "order.cancel", "product.find"}
                inner_fn = (
                    (lambda: self._actions[action](session, intent, match, utt, now))
                    if action in informational else None
                )
                return self._confirm_sidestep(session, inner_fn)

        if match.intent == FALLBACK_INTENT:
            return self._fallback_turn(session, utt, match, now)

        intent = self._intent_by_name[match.intent]
        handler = self._actions.get(intent.action)
        if handler is None:
            log.warning("intent %s has unbound action %s", intent.name, intent.action)
            return BotReply([self._pick(session, self.bundle.fallback.replies)])
        return handler(session, intent, match, utt, now)

    def _confirm_sidestep(self, session: Session, inner_fn=None) -> BotReply:
        """A turn that neither confirms, declines, nor replaces the pending
        item. It consumes the step's budget; once the budget is exceeded the
        flow is abandoned (cart untouched). Otherwise informational intents
        still get answered, with the confirmation question re-asked after."""
        pending = session.pending_item
        if self.guard_loop(session, pending) == "abandon":
            session.pending_item = None
            session.drop_context(CONFIRM_CONTEXT)
            return BotReply([self._pick(session, ESCALATION_REPLIES)])
        session.activate_context(CONFIRM_CONTEXT, self._declared_lifespan(CONFIRM_CONTEXT, 2))
        inner = inner_fn() if inner_fn else None
        ask = _render(CONFIRM_REPROMPT, {
            "quantity": pending.quantity, "product": pending.product.name,
        })
        texts = (inner.texts if inner else []) + [ask]
        return BotReply(texts, quick_replies=["Yes", "No"],
                        cart_snapshot=inner.cart_snapshot if inner else None)

    def _fallback_turn(self, session: Session, utt, match, now: datetime) -> BotReply:
        salvage = self._order_salvage(session, utt)
        if salvage is not None:
            return salvage
        return BotReply([self._pick(session, self.bundle.fallback.replies)])

    def _order_salvage(self, session: Session, utt) -> BotReply | None:
        """When no intent matched but the message reads like an order
        ("i want dragon steak"), answer about the attempted product instead
        of shrugging: resolve it fuzzily or say it isn't available."""
        words = [t.text for t in utt.tokens]
        verb_at = max((i for i, w in enumerate(words) if w in ORDER_VERBS), default=-1)
        if verb_at < 0 or verb_at == len(words) - 1:
            return None
        entities = nlu.extract_entities(
            utt, self.bundle.entity_types, self.bundle.config.fuzzy_threshold
        )
        numeric_tokens = {
            i for m in entities if m.entity_type == "number"
            for i in range(m.span[0], m.span[1])
        }
        quantity = next(
            (int(m.canonical) for m in entities if m.entity_type == "number"), 1
        )
        tail = [
            w for i, w in enumerate(words)
            if i > verb_at and i not in numeric_tokens and w not in ORDER_TAIL_STOPWORDS
        ]
        if not tail:
            return None
        surface = " ".join(tail)
        product = resolve_product(self.catalog, surface, self.bundle.config.fuzzy_threshold)
        if product is None:
            return BotReply([_render(UNAVAILABLE_TEMPLATE, {"surface": surface})])
        return self._start_confirmation(session, product, quantity)

    # -- guards -------------------------------------------------------------

    def guard_spam(self, session: Session, norm_text: str, now: datetime) -> str:
        """'terminate' when too many messages land inside the burst window or
        the same text repeats too many times in a row, else 'pass'."""
        cfg = self.bundle.config
        if session.recent and session.recent[-1][0] == norm_text:
            session.repeat_count += 1
        else:
            session.repeat_count = 1
        session.recent.append((norm_text, now))
        window_start = now.timestamp() - cfg.spam_burst_window_seconds
        burst = sum(1 for _, ts in session.recent if ts.timestamp() >= window_start)
        if burst >= cfg.spam_burst_count:
            return "terminate"
        if session.repeat_count >= cfg.spam_repeat_count:
            return "terminate"
        return "pass"

    def guard_loop(self, session: Session, step) -> str:
        """Budget for one pending step (an unconfirmed item or an unfilled
        slot). Every unproductive turn increments; past the reprompt limit
        the flow is abandoned."""
        step.reprompts += 1
        if step.reprompts > self.bundle.config.reprompt_limit:
            return "abandon"
        return "proceed"

    def _decay_contexts(self, session: Session, start_contexts: set):
        """End-of-turn lifespan bookkeeping: contexts not (re)activated this
        turn lose one turn of life; expired ones take their pending flow
        state with them."""
        for name in list(session.contexts):
            if name in session.touched_contexts:
                continue
            if name in start_contexts:
                session.contexts[name] -= 1
                if session.contexts[name] <= 0:
                    del session.contexts[name]
                    if name == CONFIRM_CONTEXT:
                        session.pending_item = None
                    elif name == PERSONAL_INFO_CONTEXT:
                        session.pending_slots = None
        session.touched_contexts = set()

    def _declared_lifespan(self, context_name: str, default: int) -> int:
        for intent in self.bundle.intents():
            for name, lifespan in intent.output_contexts:
                if name == context_name:
                    return lifespan
        return default

    # -- action handlers ------------------------------------------------------

    def act_find_products(self, session, intent, match, utt, now) -> BotReply:
        brand = match.params.get("brand")
        category = match.params.get("category")
        if brand is None and category is None:
            return BotReply([FIND_FILTER_PROMPT])
        hits = find_products(
            self.catalog,
            brand=brand.canonical if brand else None,
            category=category.canonical if category else None,
        )
        if not hits:
            return BotReply(["No products match that — try another brand or category."])
        lead = self._pick(session, intent.responses)
        lines = [f"{p.name} ({p.brand}, {p.category})" for p in hits[:10]]
        if len(hits) > 10:
            lines.append(f"...and {len(hits) - 10} more")
        return BotReply([lead, *lines])

    def act_order_taking(self, session, intent, match, utt, now) -> BotReply:
        quantity_param = match.params.get("quantity")
        quantity = max(1, int(quantity_param.canonical)) if quantity_param else 1
        product_param = match.params.get("product")

        if product_param is None:
            salvage = self._order_salvage(session, utt)
            if salvage is not None:
                return salvage
            product_spec = next(p for p in intent.parameters if p.name == "product")
            return BotReply([product_spec.reprompt])

        product = self.catalog.get(product_param.canonical)
        if product is None:
            product = resolve_product(
                self.catalog, product_param.canonical, self.bundle.config.fuzzy_threshold
            )
        if product is None:
            return BotReply([_render(UNAVAILABLE_TEMPLATE, {"surface": product_param.surface})])
        return self._start_confirmation(session, product, quantity, intent)

    def _start_confirmation(self, session, product, quantity, intent=None) -> BotReply:
        intent = intent or self._intent_by_name["orderTaking"]
        session.pending_epoch += 1
        session.pending_item = PendingItem(product, quantity, epoch=session.pending_epoch)
        for name, lifespan in intent.output_contexts or ((CONFIRM_CONTEXT, 2),):
            session.activate_context(name, lifespan)
        text = _render(self._pick(session, intent.responses),
                       {"product": product.name, "quantity": quantity})
        return BotReply([text], quick_replies=["Yes", "No"])

    def act_item_confirm(self, session, intent, match, utt, now) -> BotReply:
        pending = session.pending_item
        if pending is None:
            return BotReply([self._pick(session, self.bundle.fallback.replies)])
        session.cart.add(pending.product, pending.quantity)
        detail = f"Added {pending.quantity} x {pending.product.name} to your cart."
        session.pending_item = None
        session.drop_context(CONFIRM_CONTEXT)
        return BotReply(
            [detail, self._pick(session, intent.responses)],
            cart_snapshot=_cart_snapshot(session.cart),
        )

    def act_item_decline(self, session, intent, match, utt, now) -> BotReply:
        session.pending_item = None
        session.drop_context(CONFIRM_CONTEXT)
        return BotReply([self._pick(session, intent.responses)])

    def act_cart_check(self, session, intent, match, utt, now) -> BotReply:
        if session.cart.is_empty():
            return BotReply(
                [self._pick(session, EMPTY_CART_REPLIES)],
                cart_snapshot=[],
            )
        lead = self._pick(session, intent.responses)
        return BotReply(
            [lead, *_cart_lines_text(session.cart)],
            cart_snapshot=_cart_snapshot(session.cart),
        )

    def act_order_cancel(self, session, intent, match, utt, now) -> BotReply:
        product_param = match.params.get("product")
        if product_param is None:
            product_spec = next(p for p in intent.parameters if p.name == "product")
            return BotReply([product_spec.reprompt])
        name = product_param.canonical
        if session.cart.remove(name):
            text = _render(self._pick(session, intent.responses), {"product": name})
            return BotReply([text], cart_snapshot=_cart_snapshot(session.cart))
        return BotReply([_render(CANCEL_MISS_TEMPLATE, {"product": name})])

    def act_personal_info(self, session, intent, match, utt, now) -> BotReply:
        if session.cart.is_empty():
            return BotReply([EMPTY_CART_CHECKOUT])
        missing = self._missing_customer_fields(session)
        if not missing:
            return self._finalize_order(session, now)
        session.pending_slots = [SlotState(f) for f in missing]
        session.activate_context(
            PERSONAL_INFO_CONTEXT, self._declared_lifespan(PERSONAL_INFO_CONTEXT, 5)
        )
        lead = self._pick(session, intent.responses)
        return BotReply([lead, SLOT_PROMPTS[missing[0]]])

    def _missing_customer_fields(self, session) -> list[str]:
        c = session.customer
        missing = []
        if not c.name.strip():
            missing.append("name")
        if not c.address.strip():
            missing.append("address")
        if not valid_phone(c.phone):
            missing.append("phone")
        return missing

    def _slot_filling_turn(self, session: Session, text: str, now: datetime) -> BotReply:
        current = session.pending_slots[0]
        value = text.strip()

        if detect_unsupported_language(text):
            return self._slot_reprompt(session, current, LANGUAGE_NOTICE)

        valid = bool(value) and (current.name != "phone" or valid_phone(value))
        if not valid:
            return self._slot_reprompt(session, current)

        session.customer = replace(session.customer, **{current.name: value})
        session.pending_slots.pop(0)
        if session.pending_slots:
            session.activate_context(
                PERSONAL_INFO_CONTEXT, self._declared_lifespan(PERSONAL_INFO_CONTEXT, 5)
            )
            return BotReply([SLOT_PROMPTS[session.pending_slots[0].name]])
        session.pending_slots = None
        session.drop_context(PERSONAL_INFO_CONTEXT)
        return self._finalize_order(session, now)

    def _slot_reprompt(self, session, current: SlotState, notice: str | None = None) -> BotReply:
        if self.guard_loop(session, current) == "abandon":
            session.pending_slots = None
            session.drop_context(PERSONAL_INFO_CONTEXT)
            return BotReply([self._pick(session, ESCALATION_REPLIES)])
        session.activate_context(
            PERSONAL_INFO_CONTEXT, self._declared_lifespan(PERSONAL_INFO_CONTEXT, 5)
        )
        texts = [notice] if notice else []
        texts.append(SLOT_REPROMPTS[current.name])
        return BotReply(texts)

    def _finalize_order(self, session: Session, now: datetime) -> BotReply:
        try:
            order = self.store.create_order(
                created_at=now.replace(microsecond=0),
                channel=session.channel,
                customer=session.customer,
                lines=list(session.cart.lines),
            )
        except SheetStoreError:
            log.exception("order export failed for session %s", session.id)
            return BotReply([ORDER_RETRY_REPLY])
        summary = ", ".join(_cart_lines_text(session.cart))
        session.cart = Cart()
        return BotReply([
            f"Order {order.order_id} is confirmed: {summary}.",
            f"We'll deliver to {order.customer.address}. Thanks, {order.customer.name}!",
        ], cart_snapshot=[])

    def act_faq(self, session, intent, match, utt, now) -> BotReply:
        topic = self.faq.topic_for_intent(intent.name)
        lead = self._pick(session, intent.responses)
        return BotReply([lead, faq_answer(self.faq, topic)])

    def act_business_info(self, session, intent, match, utt, now) -> BotReply:
        lead = self._pick(session, intent.responses)
        if intent.action == "info.contact":
            return BotReply([lead, self.business.phone])
        if intent.action == "info.location":
            return BotReply([lead, self.business.address, f"Waze: {self.business.map_link}"])

        when = match.params.get("when")
        word = when.canonical if when else None
        if word in ("now", "tonight"):
            open_now, today, transition = is_open_at(self.business, now)
            if open_now:
                return BotReply([
                    f"We're open right now ({_intervals_text(today)})."
                    + (f" We close at {transition:%H:%M}." if transition else "")
                ])
            next_part = (
                f" We open again on {WEEKDAYS[transition.weekday()].capitalize()} at {transition:%H:%M}."
                if transition else ""
            )
            return BotReply([f"We're closed right now.{next_part}"])
        if word == "today":
            today = self.business.hours.get(WEEKDAYS[now.weekday()], [])
            if not today:
                return BotReply(["We're closed today."])
            return BotReply([f"Today we're open {_intervals_text(today)}."])
        if word == "tomorrow":
            day = (now.weekday() + 1) % 7
            intervals = self.business.hours.get(WEEKDAYS[day], [])
            if not intervals:
                return BotReply(["We're closed tomorrow."])
            closing = max(end for _, end in intervals)
            return BotReply([
                f"Tomorrow we're open {_intervals_text(intervals)}, closing at {closing:%H:%M}."
            ])
        if word in WEEKDAYS:
            intervals = self.business.hours.get(word, [])
            if not intervals:
                return BotReply([f"We're closed on {word.capitalize()}."])
            return BotReply([f"On {word.capitalize()} we're open {_intervals_text(intervals)}."])
        return BotReply([lead, _hours_summary(self.business)])


def _intervals_text(intervals) -> str:
    return ", ".join(f"{s:%H:%M}-{e:%H:%M}" for s, e in intervals)


def _hours_summary(info: BusinessInfo) -> str:
    parts = []
    for day in WEEKDAYS:
        intervals = info.hours.get(day, [])
        label = day.capitalize()[:3]
        parts.append(f"{label} {_intervals_text(intervals)}" if intervals else f"{label} closed")
    return "; ".join(parts)


class SessionRegistry:
    """Thread-safe session lookup. Webhook channels key sessions by
    (channel, user); REST sessions are addressed by their opaque id. Each
    session carries a lock so its turns run strictly in arrival order."""

    def __init__(self, engine: DialogEngine):
        self.engine = engine
        self._lock = threading.Lock()
        self._by_id: dict[str, Session] = {}
        self._by_channel_user: dict[tuple, Session] = {}
        self._turn_locks: dict[str, threading.Lock] = {}

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._by_id.get(session_id)

    def create(self, channel: str, user_key: str) -> Session:
        """New session for (channel, user); an existing session for the same
        key is replaced, keeping one live conversation per user per channel."""
        with self._lock:
            session = self.engine.new_session(channel, user_key)
            old = self._by_channel_user.get((channel, user_key))
            if old is not None:
                self._by_id.pop(old.id, None)
                self._turn_locks.pop(old.id, None)
            self._by_channel_user[(channel, user_key)] = session
            self._by_id[session.id] = session
            self._turn_locks[session.id] = threading.Lock()
            return session

    def get_or_create(self, channel: str, user_key: str) -> Session:
        with self._lock:
            session = self._by_channel_user.get((channel, user_key))
            if session is not None:
                return session
        return self.create(channel, user_key)

    def turn_lock(self, session_id: str) -> threading.Lock:
        with self._lock:
            return self._turn_locks.setdefault(session_id, threading.Lock())
