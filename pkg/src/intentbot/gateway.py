"""HTTP service wrapping the dialog engine: a JSON chat API for the web
client, a Messenger-compatible webhook pair (GET verify / POST receive), and
a Twilio-style WhatsApp webhook that answers in TwiML XML.

All three surfaces normalize into MessageEnvelope and share one engine;
sessions are keyed per (channel, user) and serialized per session.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from urllib.parse import parse_qs
from xml.sax.saxutils import escape

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .bundle import load_bundle, validate_bundle
from .commerce import CsvSheetStore, load_business, load_catalog, load_faq
from .dialog import BotReply, DialogEngine, SessionRegistry
from .fixtures import adjacent_paths

log = logging.getLogger("intentbot.gateway")

CAPTURE_SINK = "capture"


@dataclass(frozen=True)
class MessageEnvelope:
    channel: str  # rest | messenger | whatsapp
    user_key: str
    text: str
    received_at: datetime


@dataclass
class GatewayConfig:
    bundle_path: str
    sheet_path: str = "orders.csv"
    bind_address: str = "127.0.0.1:8080"
    messenger_verify_token: str = "dev-verify-token"
    outbound_messenger_target: str = CAPTURE_SINK
    ui_dir: str | None = None

    @classmethod
    def from_file(cls, path) -> "GatewayConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        config = cls(
            bundle_path=doc["bundlePath"],
            sheet_path=doc.get("sheetPath", "orders.csv"),
            bind_address=doc.get("bindAddress", "127.0.0.1:8080"),
            messenger_verify_token=doc.get("messengerVerifyToken", "dev-verify-token"),
            outbound_messenger_target=doc.get("outboundMessengerTarget", CAPTURE_SINK),
            ui_dir=doc.get("uiDir"),
        )
        return config.with_env_overrides()

    def with_env_overrides(self) -> "GatewayConfig":
        self.bind_address = os.environ.get("INTENTBOT_BIND", self.bind_address)
        self.messenger_verify_token = os.environ.get(
            "INTENTBOT_MESSENGER_VERIFY_TOKEN", self.messenger_verify_token
        )
        self.outbound_messenger_target = os.environ.get(
            "INTENTBOT_MESSENGER_TARGET", self.outbound_messenger_target
        )
        return self


def build_engine(config: GatewayConfig) -> DialogEngine:
    bundle = load_bundle(config.bundle_path)
    report = validate_bundle(bundle)
    if not report.ok:
        raise ValueError(
            "bundle failed validation: " + "; ".join(str(f) for f in report.findings)
        )
    paths = adjacent_paths(config.bundle_path)
    return DialogEngine(
        bundle,
        load_catalog(paths["catalog"]),
        load_faq(paths["faq"]),
        load_business(paths["business"]),
        CsvSheetStore(config.sheet_path),
    )


def _reply_payload(session_id: str, reply: BotReply) -> dict:
    payload = {
        "session_id": session_id,
        "replies": reply.texts,
        "quick_replies": reply.quick_replies or [],
        "ended": reply.end_of_conversation,
    }
    if reply.cart_snapshot is not None:
        payload["cart"] = reply.cart_snapshot
    return payload


def create_app(config: GatewayConfig, engine: DialogEngine | None = None) -> FastAPI:
    engine = engine or build_engine(config)
    registry = SessionRegistry(engine)
    app = FastAPI(title="intentbot gateway", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.registry = registry
    app.state.config = config
    app.state.started_at = time.monotonic()
    app.state.outbound_capture = []  # populated when the capture sink is active

    def run_turn(envelope: MessageEnvelope, session) -> BotReply:
        started = time.perf_counter()
        with registry.turn_lock(session.id):
            _, reply = engine.handle_message(session, envelope.text, envelope.received_at)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info(
            "turn session=%s channel=%s intent=%s confidence=%.3f latency_ms=%.1f",
            session.id, envelope.channel,
            session.last_intent or "-", session.last_confidence, elapsed_ms,
        )
        return reply

    # -- REST chat ------------------------------------------------------------

    @app.post("/v1/chat")
    async def post_chat(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        user_id = body.get("user_id")
        if not isinstance(user_id, str) or not user_id:
            return JSONResponse({"error": "user_id is required"}, status_code=400)
        text = body.get("text", "")
        if not isinstance(text, str):
            return JSONResponse({"error": "text must be a string"}, status_code=400)

        session_id = body.get("session_id")
        if session_id is not None:
            session = registry.get(session_id)
            if session is None:
                return JSONResponse({"error": "unknown session_id"}, status_code=404)
        else:
            session = registry.create("rest", user_id)

        envelope = MessageEnvelope("rest", user_id, text, datetime.now())
        reply = run_turn(envelope, session)
        return JSONResponse(_reply_payload(session.id, reply))

    @app.get("/v1/session/{session_id}/cart")
    async def get_cart(session_id: str):
        session = registry.get(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session_id"}, status_code=404)
        customer = session.customer
        return JSONResponse({
            "session_id": session.id,
            "lines": [
                {"product": l.product.name, "brand": l.product.brand,
                 "category": l.product.category, "quantity": l.quantity}
                for l in session.cart.lines
            ],
            "customer": {
                "name": bool(customer.name.strip()),
                "address": bool(customer.address.strip()),
                "phone": bool(customer.phone.strip()),
            },
        })

    # -- Messenger-compatible webhook ------------------------------------------

    @app.get("/webhook/messenger")
    async def messenger_verify(request: Request):
        params = request.query_params
        mode = params.get("hub.mode")
        token = params.get("hub.verify_token")
        challenge = params.get("hub.challenge", "")
        if mode == "subscribe" and token == config.messenger_verify_token:
            return PlainTextResponse(challenge)
        return PlainTextResponse("verification failed", status_code=403)

    def deliver_messenger(recipient: str, reply: BotReply):
        payload = {"recipient": {"id": recipient}, "message": {"text": "\n".join(reply.texts)}}
        if reply.quick_replies:
            payload["message"]["quick_replies"] = [
                {"content_type": "text", "title": t, "payload": t}
                for t in reply.quick_replies
            ]
        target = config.outbound_messenger_target
        if target == CAPTURE_SINK:
            app.state.outbound_capture.append(payload)
            return
        for attempt in (1, 2):
            try:
                httpx.post(target, json=payload, timeout=5.0).raise_for_status()
                return
            except Exception:
                log.warning("messenger delivery attempt %d failed", attempt, exc_info=True)
        log.error("giving up on messenger delivery to %s", recipient)

    @app.post("/webhook/messenger")
    async def messenger_receive(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        entries = body.get("entry") if isinstance(body, dict) else None
        if not isinstance(entries, list):
            return JSONResponse({"error": "missing entry[]"}, status_code=400)

        events = []
        for entry in entries:
            for item in entry.get("messaging", []) if isinstance(entry, dict) else []:
                sender = (item.get("sender") or {}).get("id")
                text = (item.get("message") or {}).get("text")
                if isinstance(sender, str) and sender and isinstance(text, str):
                    events.append((sender, text))
        if not events:
            return JSONResponse({"error": "no messaging events"}, status_code=400)

        for sender, text in events:
            session = registry.get_or_create("messenger", sender)
            envelope = MessageEnvelope("messenger", sender, text, datetime.now())
            reply = run_turn(envelope, session)
            deliver_messenger(sender, reply)
        return PlainTextResponse("EVENT_RECEIVED")

    # -- Twilio-style WhatsApp webhook ------------------------------------------

    @app.post("/webhook/whatsapp")
    async def whatsapp_receive(request: Request):
        form = parse_qs((await request.body()).decode("utf-8"), keep_blank_values=True)
        sender = form.get("From", [None])[0]
        text = form.get("Body", [None])[0]
        if not sender or text is None:
            return JSONResponse({"error": "From and Body are required"}, status_code=400)

        session = registry.get_or_create("whatsapp", sender)
        envelope = MessageEnvelope("whatsapp", sender, text, datetime.now())
        reply = run_turn(envelope, session)
        messages = "".join(f"<Message>{escape(t)}</Message>" for t in reply.texts)
        xml = f'<?xml version="1.0" encoding="UTF-8"?><Response>{messages}</Response>'
        return Response(content=xml, media_type="application/xml")

    # -- operational -------------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({
            "status": "ok",
            "bundle": engine.bundle.name,
            "uptime_seconds": time.monotonic() - app.state.started_at,
        })

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(config: GatewayConfig):
    """Run the gateway under uvicorn; blocks until shut down."""
    import uvicorn

    host, _, port = config.bind_address.partition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="info")
