"""Deterministic template-based narrative generation.

Wording lives in versioned JSON template files (two phrase roles per
template: a pattern description and a result explanation). Rendering is a
pure function of the source results, the template set, and the stored
identifier edits; numbers appear at 3 significant digits in prose while the
full-precision values ride along in each paragraph's ``data`` tuple.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import GeoFeatureTable
from .diagnostics import DiagnosticsReport
from .errors import NotFoundError, TemplateError
from .patterns import ClusterSet
from .regression import CalibratedModel
from .screening import (
    STRONG_CORRELATION_THRESHOLD,
    VIF_SEVERE_THRESHOLD,
    CorrelationResult,
    FeatureProfile,
    VifResult,
)

_TOKEN = re.compile(r"\{([a-z_0-9]+)\}")
_ROLES = ("pattern_description", "result_explanation")
DEFAULT_LOCAL_R2_THRESHOLD = 0.5


@dataclass(frozen=True)
class Template:
    template_id: str
    kind: str
    slots: tuple[tuple[str, str], ...]  # (role, text)
    placeholders: tuple[tuple[str, str], ...]  # (token, type)


@dataclass(frozen=True)
class TemplateSet:
    version: str
    templates: tuple[Template, ...]

    def get(self, template_id: str) -> Template:
        for t in self.templates:
            if t.template_id == template_id:
                return t
        raise NotFoundError(f"no template {template_id!r}")


@dataclass(frozen=True)
class Paragraph:
    """One rendered paragraph plus everything needed to re-render it."""

    paragraph_id: str
    template_id: str
    role: str  # "overview" | "detail" | "note"
    text: str
    anchors: tuple[str, ...]  # region ids for map hover-filtering
    data: tuple[tuple[str, float], ...]  # full-precision numeric values
    fields: tuple[tuple[str, str], ...]  # rendered placeholder strings
    default_identifier: str | None = None
    identifier: str | None = None  # user override when set
    parent_id: str | None = None
    keyphrase_regions: tuple[str, ...] = ()


@dataclass(frozen=True)
class NarrativeDoc:
    kind: str
    template_version: str
    paragraphs: tuple[Paragraph, ...]
    edits: tuple[tuple[str, str], ...] = ()

    def paragraph(self, paragraph_id: str) -> Paragraph:
        for p in self.paragraphs:
            if p.paragraph_id == paragraph_id:
                return p
        raise NotFoundError(f"no paragraph {paragraph_id!r}")

    @property
    def map_anchors(self) -> tuple[tuple[str, tuple[str, ...]], ...]:
        return tuple((p.paragraph_id, p.anchors) for p in self.paragraphs)


_DEFAULT_PATH = Path(__file__).parent / "templates" / "default.json"
_CACHE: dict[str, TemplateSet] = {}


def load_templates(path: str | Path | None = None) -> TemplateSet:
    """Load and validate a template file; fails closed on any violation."""
    path = Path(path) if path is not None else _DEFAULT_PATH
    key = str(path)
    if key in _CACHE:
        return _CACHE[key]
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TemplateError(f"cannot load template file {path}: {exc}") from exc
    templates = []
    for tid, body in raw.get("templates", {}).items():
        slots = tuple((s["role"], s["text"]) for s in body.get("slots", ()))
        declared = tuple(sorted(body.get("placeholders", {}).items()))
        names = {tok for tok, _ in declared}
        roles = {role for role, _ in slots}
        for role in _ROLES:
            if role not in roles:
                raise TemplateError(
                    f"template {tid!r} lacks a {role} slot", template=tid
                )
        for role, text in slots:
            if role not in _ROLES:
                raise TemplateError(
                    f"template {tid!r} has unknown slot role {role!r}", template=tid
                )
            for tok in _TOKEN.findall(text):
                if tok not in names:
                    raise TemplateError(
                        f"template {tid!r} renders undeclared placeholder "
                        f"{tok!r}",
                        template=tid,
                        placeholder=tok,
                    )
        templates.append(
            Template(
                template_id=tid,
                kind=body.get("kind", ""),
                slots=slots,
                placeholders=declared,
            )
        )
    ts = TemplateSet(version=str(raw.get("version", "0")), templates=tuple(templates))
    _CACHE[key] = ts
    return ts


def _fmt(value: float) -> str:
    """3 significant digits; integers render without a trailing .0."""
    value = float(value)
    if value != value:
        return "undefined"
    if value in (float("inf"), float("-inf")):
        return "infinite" if value > 0 else "negative infinite"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.3g}"


def _render_text(template: Template, values: Mapping[str, str]) -> str:
    declared = {tok for tok, _ in template.placeholders}
    missing = declared - set(values)
    if missing:
        raise TemplateError(
            f"template {template.template_id!r} missing values for "
            f"{sorted(missing)}",
            template=template.template_id,
        )
    parts = []
    for _, text in template.slots:
        parts.append(_TOKEN.sub(lambda m: str(values[m.group(1)]), text))
    return " ".join(parts)


def _paragraph(
    templates: TemplateSet,
    template_id: str,
    paragraph_id: str,
    role: str,
    *,
    text_fields: Mapping[str, str] | None = None,
    numbers: Mapping[str, float] | None = None,
    anchors: Sequence[str] = (),
    default_identifier: str | None = None,
    parent_id: str | None = None,
    keyphrase_regions: Sequence[str] = (),
) -> Paragraph:
    template = templates.get(template_id)
    fields = dict(text_fields or {})
    numbers = dict(numbers or {})
    for tok, value in numbers.items():
        fields[tok] = _fmt(value)
    if default_identifier is not None:
        fields["identifier"] = default_identifier
    text = _render_text(template, fields)
    return Paragraph(
        paragraph_id=paragraph_id,
        template_id=template_id,
        role=role,
        text=text,
        anchors=tuple(anchors),
        data=tuple(sorted(numbers.items())),
        fields=tuple(sorted(fields.items())),
        default_identifier=default_identifier,
        identifier=None,
        parent_id=parent_id,
        keyphrase_regions=tuple(keyphrase_regions),
    )


def _group_identifier(table: GeoFeatureTable, rows: Sequence[int]) -> str:
    lonlat = table.centroids_lonlat[list(rows)]
    return f"near ({lonlat[:, 1].mean():.2f}, {lonlat[:, 0].mean():.2f})"


def render_feature_narrative(
    name: str, profile: FeatureProfile, templates: TemplateSet | None = None
) -> NarrativeDoc:
    """K-S result and skew direction, then transform suggestions."""
    templates = templates or load_templates()
    skew = profile.skewness
    direction = (
        "right-skewed" if skew > 0 else "left-skewed" if skew < 0 else "symmetric"
    )
    numbers = {
        "ks_statistic": profile.ks_statistic,
        "ks_p": profile.ks_p,
        "skewness": skew,
    }
    if profile.ks_p > 0.05 or not profile.suggested_transforms:
        para = _paragraph(
            templates,
            "feature_normal",
            f"feature:{name}",
            "overview",
            text_fields={"name": name},
            numbers=numbers,
        )
    else:
        transforms = " or ".join(
            f"a {t} transform" for t in profile.suggested_transforms
        )
        para = _paragraph(
            templates,
            "feature_skewed",
            f"feature:{name}",
            "overview",
            text_fields={
                "name": name,
                "skew_direction": direction,
                "transforms": transforms,
            },
            numbers=numbers,
        )
    return NarrativeDoc(
        kind="feature", template_version=templates.version, paragraphs=(para,)
    )


def render_correlation_narrative(
    results: Sequence[CorrelationResult],
    vif: VifResult | None = None,
    templates: TemplateSet | None = None,
) -> NarrativeDoc:
    """Strong pairs with removal suggestions; VIF offenders appended."""
    templates = templates or load_templates()
    paragraphs: list[Paragraph] = []
    for res in results:
        if not res.flagged_strong:
            continue
        direction = "negative" if res.r < 0 else "positive"
        paragraphs.append(
            _paragraph(
                templates,
                "correlation_strong",
                f"correlation:{res.x_name}:{res.y_name}",
                "overview",
                text_fields={
                    "x_name": res.x_name,
                    "y_name": res.y_name,
                    "direction": direction,
                },
                numbers={"r": res.r, "p": res.p},
            )
        )
    if vif is not None:
        for name, value, severe in zip(vif.names, vif.values, vif.severe):
            if severe:
                paragraphs.append(
                    _paragraph(
                        templates,
                        "vif_severe",
                        f"vif:{name}",
                        "note",
                        text_fields={"name": name},
                        numbers={"vif": value},
                    )
                )
    if not paragraphs:
        paragraphs.append(
            _paragraph(
                templates,
                "correlation_none",
                "correlation:none",
                "overview",
                numbers={"threshold": STRONG_CORRELATION_THRESHOLD},
            )
        )
    return NarrativeDoc(
        kind="correlation",
        template_version=templates.version,
        paragraphs=tuple(paragraphs),
    )


def _diag_groups(
    kind: str, report: DiagnosticsReport, threshold: float
) -> list[tuple[str, np.ndarray, dict]]:
    """(group name, row mask, extra fields) per classification group."""
    if kind == "local_r2":
        vals = report.local_r2.clamped
        defined = ~report.local_r2.undefined_flags
        hints = {
            "high": "The model explains the dependent variable well there; "
            "the local estimates can be read with confidence.",
            "low": "The model explains little of the dependent variable "
            "there; interpret the local estimates with caution.",
        }
        return [
            (
                level,
                defined & (vals >= threshold if level == "high" else vals < threshold),
                {"level": level, "level_hint": hints[level]},
            )
            for level in ("high", "low")
        ]
    if kind == "cooks_d":
        return [("outlier", report.cooks_d.mask.copy(), {})]
    if kind == "std_residual":
        vals = report.std_residuals.values
        labels = np.array(report.std_residuals.labels)
        return [
            ("over", labels == "over", {"direction": "over-predicts"}),
            ("under", labels == "under", {"direction": "under-predicts"}),
        ]
    raise NotFoundError(f"no diagnostic narrative kind {kind!r}")


def render_diagnostic_narrative(
    kind: str,
    report: DiagnosticsReport,
    model: CalibratedModel,
    table: GeoFeatureTable,
    threshold: float = DEFAULT_LOCAL_R2_THRESHOLD,
    templates: TemplateSet | None = None,
) -> NarrativeDoc:
    """One paragraph per non-empty classification group of the indicator."""
    templates = templates or load_templates()
    rows = model.row_index
    region_ids = [table.region_ids[r] for r in rows]
    paragraphs: list[Paragraph] = []

    if kind == "std_residual":
        moran = report.morans_i_residuals
        hint = (
            "Clustered residuals point to structure the model misses."
            if moran.pseudo_p <= 0.05 and moran.statistic > 0
            else "Residuals show no strong spatial clustering."
        )
        paragraphs.append(
            _paragraph(
                templates,
                "std_residual_autocorr",
                "std_residual:autocorrelation",
                "overview",
                text_fields={"autocorr_hint": hint},
                numbers={
                    "moran": moran.statistic,
                    "pseudo_p": moran.pseudo_p,
                    "permutations": float(moran.permutations),
                },
            )
        )

    for group, mask, extra in _diag_groups(kind, report, threshold):
        pid = f"{kind}:{group}"
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            if kind == "local_r2":
                paragraphs.append(
                    _paragraph(
                        templates,
                        "local_r2_empty",
                        pid,
                        "note",
                        text_fields={"level": group},
                        numbers={"threshold": threshold},
                    )
                )
            elif kind == "cooks_d":
                paragraphs.append(
                    _paragraph(
                        templates,
                        "cooks_d_none",
                        pid,
                        "note",
                        numbers={"threshold": report.cooks_d.threshold},
                    )
                )
            continue
        anchors = [region_ids[i] for i in idx]
        ident = _group_identifier(table, [rows[i] for i in idx])
        if kind == "local_r2":
            vals = report.local_r2.clamped[idx]
            paragraphs.append(
                _paragraph(
                    templates,
                    "local_r2_group",
                    pid,
                    "detail",
                    text_fields=extra,
                    numbers={
                        "count": float(idx.size),
                        "low": float(vals.min()),
                        "high": float(vals.max()),
                        "threshold": threshold,
                    },
                    anchors=anchors,
                    default_identifier=ident,
                )
            )
        elif kind == "cooks_d":
            paragraphs.append(
                _paragraph(
                    templates,
                    "cooks_d_group",
                    pid,
                    "detail",
                    numbers={
                        "count": float(idx.size),
                        "threshold": report.cooks_d.threshold,
                    },
                    anchors=anchors,
                    default_identifier=ident,
                )
            )
        else:
            vals = report.std_residuals.values[idx]
            paragraphs.append(
                _paragraph(
                    templates,
                    "std_residual_group",
                    pid,
                    "detail",
                    text_fields=extra,
                    numbers={
                        "count": float(idx.size),
                        "low": float(vals.min()),
                        "high": float(vals.max()),
                    },
                    anchors=anchors,
                    default_identifier=ident,
                )
            )
    return NarrativeDoc(
        kind=kind, template_version=templates.version, paragraphs=tuple(paragraphs)
    )


def render_coefficient_narrative(
    surface: str,
    clusters: ClusterSet,
    mask: np.ndarray,
    model: CalibratedModel,
    table: GeoFeatureTable,
    templates: TemplateSet | None = None,
) -> NarrativeDoc:
    """Hierarchical overview-plus-cluster-detail paragraphs for one surface."""
    templates = templates or load_templates()
    dependent = model.spec.dependent
    is_intercept = surface == "intercept"
    paragraphs: list[Paragraph] = []
    groups = (
        ("positive", clusters.positive_clusters),
        ("negative", clusters.negative_clusters),
    )
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        paragraphs.append(
            _paragraph(
                templates,
                "coefficient_empty",
                f"coef:{surface}:empty",
                "overview",
                text_fields={"surface": surface, "dependent": dependent},
            )
        )
        return NarrativeDoc(
            kind="intercept" if is_intercept else "coefficient",
            template_version=templates.version,
            paragraphs=tuple(paragraphs),
        )

    for sign, group in groups:
        if not group:
            continue
        anchors = [rid for c in group for rid in c.region_ids]
        mean = float(np.mean([c.mean_coefficient for c in group]))
        overview_id = f"coef:{surface}:{sign}"
        numbers = {
            "count": float(len(anchors)),
            "n_clusters": float(len(group)),
            "mean": mean,
        }
        if is_intercept:
            para = _paragraph(
                templates,
                "intercept_overview",
                overview_id,
                "overview",
                text_fields={
                    "dependent": dependent,
                    "sign_word": "above" if sign == "positive" else "below",
                },
                numbers=numbers,
                anchors=anchors,
            )
        else:
            para = _paragraph(
                templates,
                "coefficient_overview",
                overview_id,
                "overview",
                text_fields={
                    "surface": surface,
                    "dependent": dependent,
                    "sign": sign,
                    "direction_phrase": "higher" if sign == "positive" else "lower",
                },
                numbers=numbers,
                anchors=anchors,
            )
        paragraphs.append(para)
        for cluster in group:
            paragraphs.append(
                _paragraph(
                    templates,
                    "cluster_detail",
                    f"coef:{surface}:cluster:{cluster.cluster_id}",
                    "detail",
                    numbers={
                        "size": float(cluster.size),
                        "mean": cluster.mean_coefficient,
                    },
                    anchors=cluster.region_ids,
                    default_identifier=cluster.location_identifier,
                    parent_id=overview_id,
                    keyphrase_regions=cluster.region_ids,
                )
            )
    if clusters.isolated:
        paragraphs.append(
            _paragraph(
                templates,
                "isolated_note",
                f"coef:{surface}:isolated",
                "note",
                numbers={"count": float(len(clusters.isolated))},
                anchors=clusters.isolated,
            )
        )
    return NarrativeDoc(
        kind="intercept" if is_intercept else "coefficient",
        template_version=templates.version,
        paragraphs=tuple(paragraphs),
    )


def apply_identifier_edit(
    doc: NarrativeDoc,
    paragraph_id: str,
    label: str | None,
    templates: TemplateSet | None = None,
) -> NarrativeDoc:
    """Override (or clear, with ``label=None``) one paragraph's identifier.

    Only the edited paragraph is re-rendered; every other byte of the
    document is carried over unchanged.
    """
    templates = templates or load_templates()
    target = doc.paragraph(paragraph_id)  # raises NotFoundError
    if target.default_identifier is None:
        raise TemplateError(
            f"paragraph {paragraph_id!r} has no editable identifier",
            paragraph=paragraph_id,
        )
    label = label or None
    template = templates.get(target.template_id)
    fields = dict(target.fields)
    fields["identifier"] = label if label is not None else target.default_identifier
    new_para = replace(
        target, identifier=label, text=_render_text(template, fields)
    )
    edits = tuple(e for e in doc.edits if e[0] != paragraph_id)
    if label is not None:
        edits = edits + ((paragraph_id, label),)
    return NarrativeDoc(
        kind=doc.kind,
        template_version=doc.template_version,
        paragraphs=tuple(
            new_para if p.paragraph_id == paragraph_id else p
            for p in doc.paragraphs
        ),
        edits=edits,
    )
