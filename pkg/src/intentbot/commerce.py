"""Shop-side data and storage: product catalog, FAQ knowledge base, business
info (hours, contact, location), carts, and the append-only CSV sheet store
that order exports are written to.
"""
from __future__ import annotations

import csv
import io
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from pathlib import Path

from .nlu import similarity

SHEET_COLUMNS = [
    "order_id", "timestamp", "channel", "customer_name", "phone", "address",
    "product_name", "brand", "category", "quantity",
]

WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


class SheetStoreError(Exception):
    """Raised when the order sheet cannot be written or parsed."""


class SheetRowError(SheetStoreError):
    """A row in the sheet is malformed; carries the 1-based file line."""

    def __init__(self, line, message):
        super().__init__(f"row at line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Product:
    name: str
    brand: str
    category: str


@dataclass(frozen=True)
class CartLine:
    product: Product
    quantity: int


@dataclass
class Cart:
    lines: list[CartLine] = field(default_factory=list)

    def add(self, product: Product, quantity: int):
        """Merge into an existing line for the same product, else append."""
        for i, line in enumerate(self.lines):
            if line.product.name == product.name:
                self.lines[i] = CartLine(product, line.quantity + quantity)
                return
        self.lines.append(CartLine(product, quantity))

    def remove(self, product_name: str) -> bool:
        """Drop the whole line for a product; True when something was removed."""
        before = len(self.lines)
        self.lines = [l for l in self.lines if l.product.name != product_name]
        return len(self.lines) < before

    def is_empty(self) -> bool:
        return not self.lines


@dataclass(frozen=True)
class CustomerDetails:
    name: str = ""
    address: str = ""
    phone: str = ""

    def complete(self) -> bool:
        return bool(self.name.strip() and self.address.strip() and valid_phone(self.phone))


def valid_phone(phone: str) -> bool:
    """Phones must contain at least 7 digits once separators are stripped."""
    return sum(c.isdigit() for c in phone) >= 7


@dataclass(frozen=True)
class OrderRecord:
    order_id: str
    created_at: datetime
    channel: str
    customer: CustomerDetails
    lines: tuple[CartLine, ...]


@dataclass(frozen=True)
class BusinessInfo:
    phone: str
    address: str
    map_link: str
    # weekday name -> list of (open, close) local times; empty list = closed
    hours: dict


@dataclass(frozen=True)
class FaqEntry:
    topic: str
    intent: str
    answer: str


class Catalog:
    """Products plus per-product synonym lists used for fuzzy lookup.
    Synonyms are search metadata, not product identity, so they live here
    rather than on Product."""

    def __init__(self, products, synonyms=None):
        self.products = list(products)
        names = [p.name for p in self.products]
        if len(set(names)) != len(names):
            raise ValueError("catalog product names must be unique")
        self._by_name = {p.name: p for p in self.products}
        self.synonyms = {name: tuple(syns) for name, syns in (synonyms or {}).items()}

    def get(self, name: str) -> Product | None:
        return self._by_name.get(name)

    def synonyms_for(self, name: str) -> tuple[str, ...]:
        return self.synonyms.get(name, ())

    def brands(self):
        return sorted({p.brand for p in self.products})

    def categories(self):
        return sorted({p.category for p in self.products})


def find_products(catalog: Catalog, brand=None, category=None):
    """Case-insensitive filter; both filters given means conjunction.
    Results keep catalog order."""
    out = []
    for p in catalog.products:
        if brand is not None and p.brand.lower() != brand.lower():
            continue
        if category is not None and p.category.lower() != category.lower():
            continue
        out.append(p)
    return out


def resolve_product(catalog: Catalog, surface: str, fuzzy_threshold: float) -> Product | None:
    """Best fuzzy match of a surface string against product names and their
    synonyms (compared on lowercased, space-stripped forms). None when even
    the best candidate stays below the threshold."""
    probe = "".join(surface.lower().split())
    best = None
    best_sim = -1.0
    for product in catalog.products:
        for form in (product.name, *catalog.synonyms_for(product.name)):
            key = "".join(form.lower().split())
            longest = max(len(probe), len(key))
            if longest and abs(len(probe) - len(key)) / longest > 1.0 - fuzzy_threshold:
                continue  # length gap alone already exceeds the edit budget
            sim = similarity(probe, key)
            if sim > best_sim:
                best_sim = sim
                best = product
    if best is not None and best_sim >= fuzzy_threshold:
        return best
    return None


def is_open_at(info: BusinessInfo, t: datetime):
    """Whether the shop is open at t, plus that day's intervals and the next
    open/close transition. Intervals are half-open: open at 09:00 means the
    09:00 minute counts, the closing minute does not."""
    day = WEEKDAYS[t.weekday()]
    today = info.hours.get(day, [])
    now_t = t.time()
    is_open = any(start <= now_t < end for start, end in today)

    next_transition = None
    for day_offset in range(0, 8):
        probe_date = (t + timedelta(days=day_offset)).date()
        intervals = info.hours.get(WEEKDAYS[probe_date.weekday()], [])
        boundaries = []
        for start, end in intervals:
            boundaries.extend([start, end])
        for boundary in sorted(boundaries):
            candidate = datetime.combine(probe_date, boundary)
            if t.tzinfo is not None:
                candidate = candidate.replace(tzinfo=t.tzinfo)
            if candidate > t:
                next_transition = candidate
                break
        if next_transition is not None:
            break
    return is_open, today, next_transition


class FaqKb:
    def __init__(self, entries):
        self.entries = list(entries)
        topics = [e.topic for e in self.entries]
        if len(set(topics)) != len(topics):
            raise ValueError("faq topics must be unique")
        self._by_topic = {e.topic: e for e in self.entries}
        self._by_intent = {e.intent: e for e in self.entries}

    def topic_for_intent(self, intent: str) -> str:
        entry = self._by_intent.get(intent)
        if entry is None:
            raise KeyError(f"no FAQ topic bound to intent '{intent}'")
        return entry.topic


def faq_answer(kb: FaqKb, topic: str) -> str:
    """The bound answer text, verbatim. Unknown topics signal a bundle/kb
    mismatch that validation should have caught."""
    entry = kb._by_topic.get(topic)
    if entry is None:
        raise KeyError(f"unknown FAQ topic '{topic}'")
    return entry.answer


class CsvSheetStore:
    """Order ledger backed by a local CSV file, one row per cart line.

    Appends are atomic per order: rows are staged into a replacement file
    which is swapped in with os.replace, so readers observe either none or
    all rows of an order. Writes are serialized through a lock; reads may
    run concurrently.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def next_order_id(self) -> str:
        with self._lock:
            return self._next_order_id_locked()

    def _next_order_id_locked(self) -> str:
        highest = 0
        for order in self._read_all():
            highest = max(highest, int(order.order_id))
        return f"{highest + 1:06d}"

    def create_order(self, *, created_at, channel, customer, lines) -> OrderRecord:
        """Allocate the next order id and export in one step, so concurrent
        checkouts cannot collide on ids."""
        with self._lock:
            order = OrderRecord(
                order_id=self._next_order_id_locked(),
                created_at=created_at,
                channel=channel,
                customer=customer,
                lines=tuple(lines),
            )
            self._export_locked(order)
            return order

    def export_order(self, order: OrderRecord) -> list[int]:
        """Append one row per cart line; returns the assigned 1-based data
        row ids. All rows land or none do."""
        with self._lock:
            return self._export_locked(order)

    def _export_locked(self, order: OrderRecord) -> list[int]:
        if not order.lines:
            raise SheetStoreError("orders must carry at least one cart line")
        if not order.customer.complete():
            raise SheetStoreError("orders need a complete customer (name, address, phone)")

        existing = self.path.read_text(encoding="utf-8") if self.path.exists() else ""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if not existing:
            writer.writerow(SHEET_COLUMNS)
            base_rows = 0
        else:
            base_rows = max(0, len(list(csv.reader(io.StringIO(existing)))) - 1)
        for line in order.lines:
            writer.writerow([
                order.order_id,
                order.created_at.isoformat(timespec="seconds"),
                order.channel,
                order.customer.name,
                order.customer.phone,
                order.customer.address,
                line.product.name,
                line.product.brand,
                line.product.category,
                str(line.quantity),
            ])
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        try:
            tmp.write_text(existing + buf.getvalue(), encoding="utf-8")
            os.replace(tmp, self.path)
        except OSError as e:
            if tmp.exists():
                tmp.unlink()
            raise SheetStoreError(f"could not write order sheet: {e}") from e
        return list(range(base_rows + 1, base_rows + 1 + len(order.lines)))

    def read_orders(self) -> list[OrderRecord]:
        """Rebuild OrderRecords by grouping rows on order_id. Round-trips
        export_order exactly (timestamps at second precision)."""
        return self._read_all()

    def _read_all(self) -> list[OrderRecord]:
        if not self.path.exists():
            return []
        grouped: dict[str, dict] = {}
        with self.path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return []
            if header != SHEET_COLUMNS:
                raise SheetRowError(1, f"unexpected header {header!r}")
            for row in reader:
                line_no = reader.line_num
                if len(row) != len(SHEET_COLUMNS):
                    raise SheetRowError(line_no, f"expected {len(SHEET_COLUMNS)} cells, got {len(row)}")
                rec = dict(zip(SHEET_COLUMNS, row))
                try:
                    quantity = int(rec["quantity"])
                    created = datetime.fromisoformat(rec["timestamp"])
                except ValueError as e:
                    raise SheetRowError(line_no, str(e)) from e
                if quantity < 1:
                    raise SheetRowError(line_no, f"quantity must be >= 1, got {quantity}")
                group = grouped.setdefault(rec["order_id"], {
                    "created": created,
                    "channel": rec["channel"],
                    "customer": CustomerDetails(
                        name=rec["customer_name"],
                        address=rec["address"],
                        phone=rec["phone"],
                    ),
                    "lines": [],
                })
                group["lines"].append(CartLine(
                    Product(rec["product_name"], rec["brand"], rec["category"]),
                    quantity,
                ))
        return [
            OrderRecord(
                order_id=order_id,
                created_at=g["created"],
                channel=g["channel"],
                customer=g["customer"],
                lines=tuple(g["lines"]),
            )
            for order_id, g in grouped.items()
        ]


class RemoteSheetStore:
    """Interface stub for a hosted spreadsheet backend with the same
    semantics as CsvSheetStore. Not implemented; the local CSV store is the
    production backend."""

    def next_order_id(self) -> str:
        raise NotImplementedError("remote spreadsheet backend is not implemented")

    def export_order(self, order: OrderRecord) -> list[int]:
        raise NotImplementedError("remote spreadsheet backend is not implemented")

    def read_orders(self) -> list[OrderRecord]:
        raise NotImplementedError("remote spreadsheet backend is not implemented")


# -- fixture document loading -------------------------------------------------

def load_catalog(path) -> Catalog:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    products = [
        Product(name=p["name"], brand=p["brand"], category=p["category"])
        for p in doc["products"]
    ]
    synonyms = {p["name"]: p.get("synonyms", []) for p in doc["products"]}
    return Catalog(products, synonyms)


def load_faq(path) -> FaqKb:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return FaqKb(
        FaqEntry(topic=e["topic"], intent=e["intent"], answer=e["answer"])
        for e in doc["entries"]
    )


def load_business(path) -> BusinessInfo:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    hours = {}
    for day, intervals in doc["hours"].items():
        if day not in WEEKDAYS:
            raise ValueError(f"unknown weekday '{day}' in business hours")
        parsed = []
        for start, end in intervals:
            start_t = time.fromisoformat(start)
            end_t = time.fromisoformat(end)
            if not start_t < end_t:
                raise ValueError(f"{day}: interval must open before it closes")
            parsed.append((start_t, end_t))
        hours[day] = parsed
    return BusinessInfo(
        phone=doc["phone"],
        address=doc["address"],
        map_link=doc["mapLink"],
        hours=hours,
    )
