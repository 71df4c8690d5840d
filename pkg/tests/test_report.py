import base64
import hashlib

import pytest

from esdakit.errors import ExportError, NotFoundError, RangeError
from esdakit.report import (
    PALETTES,
    Report,
    ReportItem,
    export_html,
    mutate_report,
    new_report,
    sanitize_markup,
)

PNG = b"\x89PNG\r\n\x1a\n" + b"\x00" * 32


def para(text, **kw):
    return ReportItem(kind="paragraph", content=text, **kw)


def fig(asset_id, palette="viridis", kind="map_figure"):
    return ReportItem(kind=kind, content=asset_id, palette=palette)


def base_report(*items):
    rep = new_report("Study", "1", timestamp="2026-01-01T00:00:00Z")
    for item in items:
        rep, _ = mutate_report(
            rep, "add", {"item": item}, timestamp="2026-01-01T00:00:00Z"
        )
    return rep


class TestMutate:
    def test_add_then_delete_restores(self):
        rep = base_report(para("one"), para("two"))
        added, noop = mutate_report(rep, "add", {"item": para("three")})
        assert not noop
        back, _ = mutate_report(added, "delete", {"index": 2})
        assert back.items == rep.items

    def test_move_up_at_zero_is_noop(self):
        rep = base_report(para("one"), para("two"))
        out, noop = mutate_report(rep, "move_up", {"index": 0})
        assert noop
        assert out is rep

    def test_move_down_at_end_is_noop(self):
        rep = base_report(para("one"), para("two"))
        out, noop = mutate_report(rep, "move_down", {"index": 1})
        assert noop

    def test_hand_simulated_sequence(self):
        rep = base_report()
        a, b, c = para("A"), para("B"), para("C")
        for item in (a, b, c):
            rep, _ = mutate_report(rep, "add", {"item": item})
        rep, _ = mutate_report(rep, "move_down", {"index": 0})
        rep, _ = mutate_report(rep, "delete", {"index": 2})
        # simulate: [A,B,C] -> move_down(0) -> [B,A,C] -> delete(2) -> [B,A]
        assert [i.content for i in rep.items] == ["B", "A"]

    def test_moves_preserve_multiset(self):
        rep = base_report(para("A"), para("B"), para("C"))
        moved, _ = mutate_report(rep, "move_up", {"index": 2})
        assert sorted(i.content for i in moved.items) == ["A", "B", "C"]

    def test_edit_replaces_in_place(self):
        rep = base_report(para("old"))
        out, _ = mutate_report(rep, "edit", {"index": 0, "item": para("new")})
        assert out.items[0].content == "new"
        assert len(out.items) == 1

    def test_index_out_of_range(self):
        rep = base_report(para("A"))
        with pytest.raises(NotFoundError):
            mutate_report(rep, "delete", {"index": 5})

    def test_unknown_action(self):
        rep = base_report()
        with pytest.raises(RangeError):
            mutate_report(rep, "shuffle", {})

    def test_empty_paragraph_rejected(self):
        rep = base_report()
        with pytest.raises(RangeError):
            mutate_report(rep, "add", {"item": para("   ")})

    def test_unregistered_palette_rejected(self):
        rep = base_report()
        with pytest.raises(RangeError):
            mutate_report(rep, "add", {"item": fig("a1", palette="sparkles")})

    def test_palettes_registered(self):
        assert "viridis" in PALETTES
        rep = base_report()
        out, _ = mutate_report(rep, "add", {"item": fig("a1", "magma")})
        assert out.items[0].palette == "magma"

    def test_timestamp_updates_modified(self):
        rep = base_report(para("A"))
        out, _ = mutate_report(
            rep, "move_down", {"index": 0}, timestamp="2026-02-02T00:00:00Z"
        )  # single item: boundary no-op keeps timestamp
        assert out.modified_at == rep.modified_at
        out2, _ = mutate_report(
            rep, "add", {"item": para("B")}, timestamp="2026-02-02T00:00:00Z"
        )
        assert out2.modified_at == "2026-02-02T00:00:00Z"
        assert out2.created_at == rep.created_at


class TestSanitizer:
    def test_keeps_formatting(self):
        out = sanitize_markup('<b>bold</b> and <span class="hot">warm</span>')
        assert out == '<b>bold</b> and <span class="hot">warm</span>'

    def test_strips_script_entirely(self):
        out = sanitize_markup('before<script>alert("x")</script>after')
        assert "script" not in out
        assert "alert" not in out
        assert out == "beforeafter"

    def test_drops_unknown_tags_keeps_text(self):
        out = sanitize_markup("<div onclick='x'>inner</div>")
        assert out == "inner"

    def test_drops_event_attributes(self):
        out = sanitize_markup('<b onmouseover="evil()">x</b>')
        assert out == "<b>x</b>"

    def test_blocks_css_url(self):
        out = sanitize_markup('<span style="background:url(http://x)">t</span>')
        assert out == "<span>t</span>"

    def test_escapes_stray_angle_text(self):
        out = sanitize_markup("a < b & c")
        assert "&lt;" in out and "&amp;" in out


class TestExport:
    def test_empty_report_valid(self):
        doc = export_html(base_report()).decode()
        assert doc.startswith("<!DOCTYPE html>")
        assert "Study" in doc
        assert "</html>" in doc

    def test_paragraph_and_figure_embedded(self):
        rep = base_report(para("The <b>result</b> holds."), fig("snap1"))
        doc = export_html(rep, {"snap1": PNG}).decode()
        assert "The <b>result</b> holds." in doc
        assert "data:image/png;base64," in doc
        assert base64.b64encode(PNG).decode() in doc
        assert "viridis" in doc

    def test_deterministic_bytes(self):
        rep = base_report(para("stable"), fig("s1", "blues"))
        a = export_html(rep, {"s1": PNG})
        b = export_html(rep, {"s1": PNG})
        assert hashlib.sha256(a).hexdigest() == hashlib.sha256(b).hexdigest()

    def test_missing_asset_lists_references(self):
        rep = base_report(fig("gone1"), fig("gone2", "magma", "chart_figure"))
        with pytest.raises(ExportError) as err:
            export_html(rep, {})
        assert err.value.detail["unresolved"] == ["gone1", "gone2"]

    def test_provenance_footnotes(self):
        rep = base_report(
            para("finding", source_module="diagnostics", state_hash="abc123")
        )
        doc = export_html(rep).decode()
        assert "diagnostics" in doc
        assert "abc123" in doc
        assert "template version 1" in doc

    def test_jpeg_and_svg_mime(self):
        rep = base_report(
            fig("j"), ReportItem(kind="chart_figure", content="s", palette="blues")
        )
        doc = export_html(
            rep, {"j": b"\xff\xd8\xff\xe0rest", "s": b"<svg xmlns='x'></svg>"}
        ).decode()
        assert "data:image/jpeg;base64," in doc
        assert "data:image/svg+xml;base64," in doc

    def test_export_pure_no_mutation(self):
        rep = base_report(para("x"))
        before = rep.items
        export_html(rep)
        assert rep.items == before
