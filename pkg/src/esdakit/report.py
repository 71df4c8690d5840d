"""Ordered, editable analytical report and standalone HTML export.

Reports are immutable values; every mutation returns a new report plus a
no-op flag (boundary moves are flagged, not errors). Export inlines all
styling and embeds figure assets as base64 data URIs so the output is a
single self-contained document; paragraph markup passes through a strict
whitelist sanitizer first.
"""

from __future__ import annotations

import base64
import html
import re
import time
from dataclasses import dataclass, replace
from html.parser import HTMLParser
from typing import Mapping

from .errors import ExportError, NotFoundError, RangeError

ITEM_KINDS = ("paragraph", "map_figure", "chart_figure")
FIGURE_KINDS = ("map_figure", "chart_figure")
ACTIONS = ("add", "edit", "delete", "move_up", "move_down")

PALETTES = (
    "viridis",
    "magma",
    "blues",
    "greens",
    "orange-red",
    "red-blue-diverging",
    "brown-teal-diverging",
    "qualitative-10",
)

ALLOWED_TAGS = frozenset(
    {"b", "i", "em", "strong", "u", "sub", "sup", "br", "span", "code", "mark"}
)
ALLOWED_ATTRS = frozenset({"class", "style"})
_DROP_CONTENT_TAGS = frozenset({"script", "style", "iframe", "object", "embed"})
_UNSAFE_CSS = re.compile(r"url\s*\(|expression\s*\(|@import", re.IGNORECASE)


@dataclass(frozen=True)
class ReportItem:
    kind: str  # paragraph | map_figure | chart_figure
    content: str  # rich text, or asset id for figures
    palette: str | None = None  # figures only
    source_module: str = ""
    state_hash: str = ""


@dataclass(frozen=True)
class Report:
    title: str
    items: tuple[ReportItem, ...] = ()
    created_at: str = ""
    modified_at: str = ""
    template_version: str = ""


def _utcnow() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def new_report(title: str, template_version: str, timestamp: str | None = None) -> Report:
    ts = timestamp or _utcnow()
    return Report(
        title=title,
        items=(),
        created_at=ts,
        modified_at=ts,
        template_version=template_version,
    )


def validate_item(item: ReportItem) -> None:
    if item.kind not in ITEM_KINDS:
        raise RangeError(
            f"unknown report item kind {item.kind!r}; expected one of "
            f"{', '.join(ITEM_KINDS)}"
        )
    if item.kind == "paragraph":
        if not item.content.strip():
            raise RangeError("paragraph content is empty after trimming")
    else:
        if not item.content:
            raise RangeError(f"{item.kind} item needs an asset reference")
        if item.palette is not None and item.palette not in PALETTES:
            raise RangeError(
                f"palette {item.palette!r} not registered; choose from "
                f"{', '.join(PALETTES)}"
            )


def mutate_report(
    report: Report,
    action: str,
    payload: Mapping,
    timestamp: str | None = None,
) -> tuple[Report, bool]:
    """Apply one editing action; returns (new report, no-op flag)."""
    if action not in ACTIONS:
        raise RangeError(
            f"unknown action {action!r}; expected one of {', '.join(ACTIONS)}"
        )
    items = list(report.items)

    def require_index() -> int:
        idx = payload.get("index")
        if not isinstance(idx, int) or not (0 <= idx < len(items)):
            raise NotFoundError(
                f"no report item at index {idx!r} (have {len(items)})"
            )
        return idx

    if action == "add":
        item = payload["item"]
        validate_item(item)
        at = payload.get("index", len(items))
        if not isinstance(at, int) or not (0 <= at <= len(items)):
            raise NotFoundError(f"cannot insert at index {at!r}")
        items.insert(at, item)
    elif action == "edit":
        idx = require_index()
        item = payload["item"]
        validate_item(item)
        items[idx] = item
    elif action == "delete":
        idx = require_index()
        del items[idx]
    elif action == "move_up":
        idx = require_index()
        if idx == 0:
            return report, True
        items[idx - 1], items[idx] = items[idx], items[idx - 1]
    else:  # move_down
        idx = require_index()
        if idx == len(items) - 1:
            return report, True
        items[idx + 1], items[idx] = items[idx], items[idx + 1]

    return (
        replace(
            report,
            items=tuple(items),
            modified_at=timestamp or _utcnow(),
        ),
        False,
    )


class _Sanitizer(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.out: list[str] = []
        self._suppress = 0

    def handle_starttag(self, tag, attrs):
        if tag in _DROP_CONTENT_TAGS:
            self._suppress += 1
            return
        if self._suppress or tag not in ALLOWED_TAGS:
            return
        rendered = ""
        for name, value in attrs:
            if name not in ALLOWED_ATTRS or value is None:
                continue
            if name == "style" and _UNSAFE_CSS.search(value):
                continue
            rendered += f' {name}="{html.escape(value, quote=True)}"'
        if tag == "br":
            self.out.append("<br/>")
        else:
            self.out.append(f"<{tag}{rendered}>")

    def handle_endtag(self, tag):
        if tag in _DROP_CONTENT_TAGS:
            self._suppress = max(0, self._suppress - 1)
            return
        if self._suppress or tag not in ALLOWED_TAGS or tag == "br":
            return
        self.out.append(f"</{tag}>")

    def handle_data(self, data):
        if not self._suppress:
            self.out.append(html.escape(data))


def sanitize_markup(text: str) -> str:
    """Whitelist formatting tags and class/style attributes; drop the rest."""
    parser = _Sanitizer()
    parser.feed(text)
    parser.close()
    return "".join(parser.out)


def _mime(blob: bytes) -> str:
    if blob.startswith(b"\x89PNG"):
        return "image/png"
    if blob.startswith(b"\xff\xd8"):
        return "image/jpeg"
    head = blob[:256].lstrip()
    if head.startswith(b"<?xml") or head.startswith(b"<svg"):
        return "image/svg+xml"
    return "application/octet-stream"


_STYLE = """
body { font-family: Georgia, 'Times New Roman', serif; margin: 2rem auto;
       max-width: 46rem; line-height: 1.5; color: #1a1a1a; }
h1 { font-size: 1.6rem; border-bottom: 2px solid #444; padding-bottom: .3rem; }
section.item { margin: 1rem 0; }
figure.item { margin: 1.5rem 0; text-align: center; }
figure.item img { max-width: 100%; }
figcaption { font-size: .85rem; color: #555; }
footer { margin-top: 3rem; font-size: .8rem; color: #555;
         border-top: 1px solid #bbb; padding-top: .5rem; }
footer ol { padding-left: 1.2rem; }
@media print { body { margin: 0; max-width: none; } footer { page-break-inside: avoid; } }
""".strip()


def export_html(report: Report, assets: Mapping[str, bytes] | None = None) -> bytes:
    """Render the report to one self-contained HTML document.

    Pure function of (report, assets): identical inputs give identical
    bytes. Unresolvable figure references fail before any output.
    """
    assets = assets or {}
    missing = [
        item.content
        for item in report.items
        if item.kind in FIGURE_KINDS and item.content not in assets
    ]
    if missing:
        raise ExportError(
            "unresolved asset references: " + ", ".join(sorted(missing)),
            unresolved=sorted(missing),
        )

    blocks: list[str] = []
    footnotes: list[str] = []
    for i, item in enumerate(report.items):
        mark = ""
        if item.source_module or item.state_hash:
            footnotes.append(
                f"<li>item {i + 1}: {html.escape(item.source_module or 'unknown')}"
                f" @ <code>{html.escape(item.state_hash or 'n/a')}</code></li>"
            )
            mark = f'<sup class="prov">[{len(footnotes)}]</sup>'
        if item.kind == "paragraph":
            blocks.append(
                f'<section class="item paragraph">{sanitize_markup(item.content)}'
                f"{mark}</section>"
            )
        else:
            blob = assets[item.content]
            b64 = base64.b64encode(blob).decode("ascii")
            caption = html.escape(item.palette or "default palette")
            blocks.append(
                f'<figure class="item {item.kind}">'
                f'<img src="data:{_mime(blob)};base64,{b64}" '
                f'alt="{html.escape(item.kind)}"/>'
                f"<figcaption>color scheme: {caption}{mark}</figcaption></figure>"
            )

    footer = (
        "<footer>"
        f"<div>template version {html.escape(report.template_version or 'n/a')}"
        f" &middot; created {html.escape(report.created_at)}"
        f" &middot; modified {html.escape(report.modified_at)}</div>"
        + (f"<ol>{''.join(footnotes)}</ol>" if footnotes else "")
        + "</footer>"
    )
    doc = (
        "<!DOCTYPE html>\n"
        '<html lang="en"><head><meta charset="utf-8"/>'
        f"<title>{html.escape(report.title)}</title>"
        f"<style>{_STYLE}</style></head><body>"
        f"<h1>{html.escape(report.title)}</h1>"
        + "".join(blocks)
        + footer
        + "</body></html>"
    )
    return doc.encode("utf-8")
