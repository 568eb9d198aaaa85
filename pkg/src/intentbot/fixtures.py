"""Built-in demo shop fixtures: agent bundle, catalog, FAQ, and business
info, packaged as JSON next to this module."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .bundle import AgentBundle, load_bundle
from .commerce import BusinessInfo, Catalog, FaqKb, load_business, load_catalog, load_faq


def fixture_path(name: str) -> Path:
    return Path(resources.files("intentbot").joinpath("data", name))


def fixture_bundle() -> AgentBundle:
    """The demo shop bundle: product-info, faq, and business-contact
    sub-agents, 13 intents, and the ProductName/Brand/Category/Yes/No plus
    system entity types."""
    return load_bundle(fixture_path("shop.bundle.json"))


def fixture_catalog() -> Catalog:
    return load_catalog(fixture_path("shop.catalog.json"))


def fixture_faq() -> FaqKb:
    return load_faq(fixture_path("shop.faq.json"))


def fixture_business() -> BusinessInfo:
    return load_business(fixture_path("shop.business.json"))


def adjacent_paths(bundle_path) -> dict:
    """Catalog/FAQ/business documents live next to their bundle:
    x.bundle.json -> x.catalog.json, x.faq.json, x.business.json."""
    bundle_path = Path(bundle_path)
    name = bundle_path.name
    stem = name[:-len(".bundle.json")] if name.endswith(".bundle.json") else bundle_path.stem
    parent = bundle_path.parent
    return {
        "catalog": parent / f"{stem}.catalog.json",
        "faq": parent / f"{stem}.faq.json",
        "business": parent / f"{stem}.business.json",
    }
