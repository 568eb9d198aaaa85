"""Operator command line: local chat REPL, bundle validation, corpus
evaluation, order inspection, and service launch.

Exit codes are a stable contract for CI: 0 success, 1 validation or
accuracy failure, 2 I/O or parse failure.
"""
from __future__ import annotations

import sys
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import click

from .bundle import BundleError, BundleParseError, load_bundle, validate_bundle
from .commerce import CsvSheetStore, SheetRowError, load_business, load_catalog, load_faq
from .dialog import DialogEngine
from .fixtures import adjacent_paths, fixture_path
from .nlu import FALLBACK_INTENT, classify, normalize

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_IO = 2


@dataclass(frozen=True)
class EvalCase:
    utterance: str
    expected_intent: str
    contexts: tuple[str, ...] = ()


class CorpusError(Exception):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def load_corpus(path) -> list[EvalCase]:
    """TSV corpus: utterance TAB expected intent TAB optional comma-joined
    contexts. Blank lines and #-comments are skipped."""
    cases = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) not in (2, 3) or not cells[0].strip() or not cells[1].strip():
            raise CorpusError(line_no, f"expected 2 or 3 tab-separated cells, got {len(cells)}")
        contexts = tuple(
            c.strip() for c in cells[2].split(",") if c.strip()
        ) if len(cells) == 3 else ()
        cases.append(EvalCase(cells[0], cells[1].strip(), contexts))
    return cases


def _load_bundle_or_exit(bundle_path):
    try:
        return load_bundle(bundle_path)
    except BundleParseError as e:
        click.echo(f"error: bundle is not valid JSON ({e})", err=True)
        sys.exit(EXIT_IO)
    except (BundleError, OSError) as e:
        click.echo(f"error: could not load bundle: {e}", err=True)
        sys.exit(EXIT_IO)


def _build_engine_or_exit(bundle_path, sheet_path):
    bundle = _load_bundle_or_exit(bundle_path)
    report = validate_bundle(bundle)
    if not report.ok:
        for finding in report.findings:
            click.echo(str(finding), err=True)
        click.echo("error: bundle failed validation", err=True)
        sys.exit(EXIT_FAILED)
    paths = adjacent_paths(bundle_path)
    try:
        catalog = load_catalog(paths["catalog"])
        faq = load_faq(paths["faq"])
        business = load_business(paths["business"])
    except (OSError, ValueError, KeyError) as e:
        click.echo(f"error: could not load shop data next to the bundle: {e}", err=True)
        sys.exit(EXIT_IO)
    return DialogEngine(bundle, catalog, faq, business, CsvSheetStore(sheet_path))


DEFAULT_BUNDLE = str(fixture_path("shop.bundle.json"))


@click.group()
def main():
    """Intent-matching customer service chatbot."""


@main.command()
@click.option("--bundle", "bundle_path", default=DEFAULT_BUNDLE, show_default="built-in demo shop")
@click.option("--sheet", "sheet_path", default="orders.csv", show_default=True)
def chat(bundle_path, sheet_path):
    """Interactive chat REPL against a bundle. /cart shows the cart,
    /quit exits."""
    engine = _build_engine_or_exit(bundle_path, sheet_path)
    session = engine.new_session("rest", "local-operator")
    click.echo(f"chatting with '{engine.bundle.name}' — /cart shows your cart, /quit exits")
    while True:
        try:
            line = input("you> ")
        except (EOFError, KeyboardInterrupt):
            click.echo("")
            break
        if line.strip() == "/quit":
            break
        if line.strip() == "/cart":
            if session.cart.is_empty():
                click.echo("bot> your cart is empty")
            else:
                for cart_line in session.cart.lines:
                    click.echo(f"bot> {cart_line.quantity} x {cart_line.product.name}")
            continue
        _, reply = engine.handle_message(session, line, datetime.now())
        for text in reply.texts:
            click.echo(f"bot> {text}")
        if reply.quick_replies:
            click.echo(f"     [{' / '.join(reply.quick_replies)}]")
        if reply.end_of_conversation:
            break
    sys.exit(EXIT_OK)


@main.command()
@click.option("--bundle", "bundle_path", default=DEFAULT_BUNDLE, show_default="built-in demo shop")
def validate(bundle_path):
    """Validate a bundle file; exit 0 only when there are no findings."""
    bundle = _load_bundle_or_exit(bundle_path)
    report = validate_bundle(bundle)
    if report.ok:
        intents = sum(len(sa.intents) for sa in bundle.sub_agents)
        click.echo(
            f"ok: {bundle.name} ({len(bundle.sub_agents)} sub-agents, "
            f"{intents} intents, {len(bundle.entity_types)} entity types)"
        )
        sys.exit(EXIT_OK)
    for finding in report.findings:
        click.echo(str(finding))
    click.echo(f"{len(report.findings)} finding(s)")
    sys.exit(EXIT_FAILED)


@main.command(name="eval")
@click.option("--bundle", "bundle_path", default=DEFAULT_BUNDLE, show_default="built-in demo shop")
@click.option("--corpus", "corpus_path", default=str(fixture_path("eval_corpus.tsv")),
              show_default="built-in corpus")
@click.option("--min-accuracy", type=float, default=0.9, show_default=True)
def eval_corpus(bundle_path, corpus_path, min_accuracy):
    """Classify every corpus case and report accuracy plus per-intent
    precision/recall; exit 0 only when accuracy clears the bar."""
    bundle = _load_bundle_or_exit(bundle_path)
    try:
        cases = load_corpus(corpus_path)
    except CorpusError as e:
        click.echo(f"error: malformed corpus: {e}", err=True)
        sys.exit(EXIT_IO)
    except OSError as e:
        click.echo(f"error: could not read corpus: {e}", err=True)
        sys.exit(EXIT_IO)
    if not cases:
        click.echo("error: corpus is empty", err=True)
        sys.exit(EXIT_IO)

    known = {i.name for i in bundle.intents()} | {FALLBACK_INTENT}
    unknown_expected = sorted({c.expected_intent for c in cases} - known)
    if unknown_expected:
        click.echo(f"error: corpus expects unknown intents: {', '.join(unknown_expected)}", err=True)
        sys.exit(EXIT_IO)

    hits = 0
    predicted_count = defaultdict(int)
    expected_count = defaultdict(int)
    correct_count = defaultdict(int)
    misses = []
    for case in cases:
        match = classify(normalize(case.utterance), bundle, set(case.contexts))
        predicted_count[match.intent] += 1
        expected_count[case.expected_intent] += 1
        if match.intent == case.expected_intent:
            hits += 1
            correct_count[case.expected_intent] += 1
        else:
            misses.append((case, match))

    click.echo(f"{'intent':<20} {'precision':>9} {'recall':>7} {'cases':>6}")
    for intent in sorted(expected_count | predicted_count):
        correct = correct_count[intent]
        precision = correct / predicted_count[intent] if predicted_count[intent] else 0.0
        recall = correct / expected_count[intent] if expected_count[intent] else 0.0
        click.echo(f"{intent:<20} {precision:>9.2f} {recall:>7.2f} {expected_count[intent]:>6}")
    for case, match in misses:
        click.echo(f"miss: {case.utterance!r} expected {case.expected_intent}, "
                   f"got {match.intent} ({match.confidence:.2f})")
    accuracy = hits / len(cases)
    click.echo(f"accuracy {accuracy:.4f} ({hits}/{len(cases)}), required {min_accuracy}")
    sys.exit(EXIT_OK if accuracy >= min_accuracy else EXIT_FAILED)


@main.command()
@click.option("--sheet", "sheet_path", default="orders.csv", show_default=True)
def orders(sheet_path):
    """Print recorded orders grouped by order id."""
    store = CsvSheetStore(sheet_path)
    try:
        records = store.read_orders()
    except SheetRowError as e:
        click.echo(f"error: corrupt sheet: {e}", err=True)
        sys.exit(EXIT_IO)
    if not records:
        click.echo("no orders")
        sys.exit(EXIT_OK)
    for order in records:
        click.echo(
            f"order {order.order_id}  {order.created_at.isoformat()}  "
            f"{order.channel}  {order.customer.name}  {order.customer.phone}"
        )
        for line in order.lines:
            click.echo(f"  {line.quantity} x {line.product.name} "
                       f"({line.product.brand}, {line.product.category})")
    click.echo(f"{len(records)} order(s)")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--bundle", "bundle_path", default=DEFAULT_BUNDLE, show_default="built-in demo shop")
@click.option("--sheet", "sheet_path", default="orders.csv", show_default=True)
@click.option("--bind", "bind_address", default="127.0.0.1:8080", show_default=True)
@click.option("--config", "config_path", default=None,
              help="Gateway config file; flags override its values.")
@click.option("--ui-dir", "ui_dir", default=None,
              help="Directory with the built web chat client, served at /.")
def serve(bundle_path, sheet_path, bind_address, config_path, ui_dir):
    """Run the HTTP gateway (REST chat + messenger/whatsapp webhooks)."""
    from .gateway import GatewayConfig, serve as run_server

    if config_path:
        config = GatewayConfig.from_file(config_path)
        if bundle_path != DEFAULT_BUNDLE:
            config.bundle_path = bundle_path
        if sheet_path != "orders.csv":
            config.sheet_path = sheet_path
        if bind_address != "127.0.0.1:8080":
            config.bind_address = bind_address
        if ui_dir:
            config.ui_dir = ui_dir
    else:
        config = GatewayConfig(
            bundle_path=bundle_path,
            sheet_path=sheet_path,
            bind_address=bind_address,
            ui_dir=ui_dir,
        ).with_env_overrides()
    # fail fast on a broken bundle before binding the port
    _build_engine_or_exit(config.bundle_path, config.sheet_path)
    run_server(config)


if __name__ == "__main__":
    main()
