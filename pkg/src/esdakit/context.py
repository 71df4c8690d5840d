"""Per-region encyclopedia corpus, TextRank keyphrases, paragraph lookup.

Offline-first: the corpus normally comes from a fixture directory holding
one JSON document per region. The live MediaWiki client sits behind
``FetchConfig(offline=False)`` and caches raw responses on disk keyed by
(page title, revision id), so repeated runs are hermetic snapshots.

Keyphrase extraction is a self-contained TextRank: content words (alphabetic,
length >= 3, not stopworded) form a co-occurrence graph with a sliding window
of 4 content words inside each sentence; PageRank runs to L1 < 1e-6 with
damping 0.85 and uniform dangling redistribution; adjacent top-third words
merge into phrases scored by the sum of member scores.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import RangeError

PAGERANK_DAMPING = 0.85
PAGERANK_TOL = 1e-6
PAGERANK_MAX_ITER = 200
WINDOW = 4
DEFAULT_KEYPHRASES = 20
MIN_WORD_LEN = 3

# compact English stoplist: function words only, so content words survive
STOPWORDS = frozenset(
    """
    the and for are but not you all any can had her was one our out day get
    has him his how man new now old see two way who boy did its let put say
    she too use that with have this will your from they know want been good
    much some time very when come here just like long make many more only
    over such take than them well were what where which while with would
    there their been about after also among because before belong between
    both during each either enough ever every few further having herself
    himself his hers into itself made might most must myself neither nor
    off once other ought ourselves own same shall should since so than
    themselves then these those through until upon us we whom whose why
    yet yours yourself against again
    """.split()
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TOKEN = re.compile(r"[A-Za-z]+")


@dataclass(frozen=True)
class RegionDocuments:
    """All encyclopedia content mapped to one region."""

    region_id: str
    title: str | None
    revision: str | None
    sections: tuple[tuple[str, str], ...]  # (topic, paragraph)


@dataclass(frozen=True)
class ContextCorpus:
    resolution: str
    fetched_at: str
    regions: tuple[RegionDocuments, ...]
    warnings: tuple[str, ...] = ()

    def slice(self, region_ids: Iterable[str]) -> tuple[RegionDocuments, ...]:
        wanted = set(region_ids)
        return tuple(r for r in self.regions if r.region_id in wanted)


@dataclass(frozen=True)
class KeyphraseEntry:
    phrase: str
    score: float
    topic: str
    region_ids: tuple[str, ...]


@dataclass(frozen=True)
class KeyphraseList:
    entries: tuple[KeyphraseEntry, ...]
    n: int


@dataclass(frozen=True)
class ParagraphMatch:
    region_id: str
    topic: str
    paragraph: str
    offsets: tuple[tuple[int, int], ...]


@dataclass
class FetchConfig:
    offline: bool = True
    fixture_dir: Path | None = None
    cache_dir: Path | None = None
    base_url: str = "https://en.wikipedia.org/w/api.php"
    max_retries: int = 4
    backoff_base: float = 0.5
    timeout: float = 20.0
    user_agent: str = "esdakit/0.1 (offline-capable research tool)"
    sleeper: object = field(default=time.sleep, repr=False)


def _slug(title: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", title)


def _sections_from_fixture(doc: dict) -> tuple[tuple[str, str], ...]:
    out = []
    for section in doc.get("sections", ()):
        topic = str(section.get("topic", "Overview"))
        for para in section.get("paragraphs", ()):
            text = str(para).strip()
            if text:
                out.append((topic, text))
    return tuple(out)


def _sections_from_extract(extract: str) -> tuple[tuple[str, str], ...]:
    """Split a plain-text extract into (topic, paragraph) pairs.

    Level-2 headings start new topics; deeper headings fold into the
    current topic; the lead section is topic "Overview".
    """
    topic = "Overview"
    out = []
    for block in extract.split("\n\n"):
        block = block.strip()
        if not block:
            continue
        heading = re.match(r"^(={2,})\s*(.+?)\s*\1\s*$", block.split("\n")[0])
        if heading:
            if len(heading.group(1)) == 2:
                topic = heading.group(2)
            rest = "\n".join(block.split("\n")[1:]).strip()
            if rest:
                out.append((topic, rest))
            continue
        out.append((topic, block))
    return tuple(out)


def _fetch_live(title: str, config: FetchConfig) -> dict:
    """One page via the wiki API with caching and exponential backoff."""
    import requests

    cache_dir = Path(config.cache_dir) if config.cache_dir else None
    if cache_dir:
        cache_dir.mkdir(parents=True, exist_ok=True)
        pointer = cache_dir / f"{_slug(title)}.latest"
        if pointer.exists():
            rev = pointer.read_text().strip()
            payload = cache_dir / f"{_slug(title)}@{rev}.json"
            if payload.exists():
                return json.loads(payload.read_text())

    params = {
        "action": "query",
        "prop": "extracts|revisions",
        "rvprop": "ids",
        "explaintext": "1",
        "redirects": "1",
        "format": "json",
        "titles": title,
    }
    last_error: Exception | None = None
    for attempt in range(config.max_retries):
        try:
            resp = requests.get(
                config.base_url,
                params=params,
                timeout=config.timeout,
                headers={"User-Agent": config.user_agent},
            )
            if resp.status_code in (429, 503):
                config.sleeper(config.backoff_base * 2**attempt)
                continue
            resp.raise_for_status()
            data = resp.json()
            break
        except Exception as exc:  # network errors retry with backoff
            last_error = exc
            config.sleeper(config.backoff_base * 2**attempt)
    else:
        raise RuntimeError(f"fetch failed for {title!r}: {last_error}")

    pages = data.get("query", {}).get("pages", {})
    page = next(iter(pages.values()), {})
    if "missing" in page or not page.get("extract"):
        result = {"title": title, "revision": None, "extract": ""}
    else:
        revs = page.get("revisions") or [{}]
        result = {
            "title": page.get("title", title),
            "revision": str(revs[0].get("revid", "")),
            "extract": page["extract"],
        }
    if cache_dir and result["revision"]:
        rev = result["revision"]
        (cache_dir / f"{_slug(title)}@{rev}.json").write_text(json.dumps(result))
        (cache_dir / f"{_slug(title)}.latest").write_text(rev)
    return result


def fetch_region_documents(
    pages: Mapping[str, str],
    resolution: str,
    config: FetchConfig | None = None,
) -> ContextCorpus:
    """Build the corpus for ``pages`` (region_id -> page title).

    Offline mode reads ``fixture_dir/<region_id>.json`` only; regions with
    no fixture (or a missing live page) get an empty document plus a
    warning, never an exception.
    """
    config = config or FetchConfig()
    regions = []
    warnings = []
    for region_id in sorted(pages):
        title = pages[region_id]
        if config.offline:
            if config.fixture_dir is None:
                raise RangeError("offline mode requires a fixture directory")
            path = Path(config.fixture_dir) / f"{region_id}.json"
            if not path.exists():
                warnings.append(f"no fixture for region {region_id}")
                regions.append(RegionDocuments(region_id, None, None, ()))
                continue
            doc = json.loads(path.read_text())
            regions.append(
                RegionDocuments(
                    region_id=region_id,
                    title=doc.get("title", title),
                    revision=str(doc.get("revision", "")) or None,
                    sections=_sections_from_fixture(doc),
                )
            )
            continue
        try:
            raw = _fetch_live(title, config)
        except Exception as exc:
            warnings.append(f"fetch failed for region {region_id}: {exc}")
            regions.append(RegionDocuments(region_id, None, None, ()))
            continue
        sections = _sections_from_extract(raw["extract"]) if raw["extract"] else ()
        if not sections:
            warnings.append(f"no page content for region {region_id}")
        regions.append(
            RegionDocuments(
                region_id=region_id,
                title=raw["title"],
                revision=raw["revision"],
                sections=sections,
            )
        )
    return ContextCorpus(
        resolution=resolution,
        fetched_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        regions=tuple(regions),
        warnings=tuple(warnings),
    )


def _sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _is_candidate(word: str) -> bool:
    return len(word) >= MIN_WORD_LEN and word.isalpha() and word not in STOPWORDS


def _pagerank(n_nodes: int, edges: set[tuple[int, int]]) -> np.ndarray:
    """Uniform-teleport PageRank; scores sum to 1. Dense-free via sparse."""
    from scipy.sparse import csr_matrix

    if n_nodes == 0:
        return np.zeros(0)
    if not edges:
        return np.full(n_nodes, 1.0 / n_nodes)
    rows, cols = [], []
    for a, b in edges:
        rows += [a, b]
        cols += [b, a]
    adj = csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes)
    )
    degree = np.asarray(adj.sum(axis=1)).ravel()
    dangling = degree == 0
    inv_degree = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, degree))
    rank = np.full(n_nodes, 1.0 / n_nodes)
    for _ in range(PAGERANK_MAX_ITER):
        spread = adj.T @ (rank * inv_degree)
        spread += rank[dangling].sum() / n_nodes
        new = (1.0 - PAGERANK_DAMPING) / n_nodes + PAGERANK_DAMPING * spread
        if np.abs(new - rank).sum() < PAGERANK_TOL:
            rank = new
            break
        rank = new
    return rank


def extract_keyphrases(
    regions: Sequence[RegionDocuments], n: int = DEFAULT_KEYPHRASES
) -> KeyphraseList:
    """TextRank over the supplied slice of the corpus; top ``n`` phrases."""
    if n < 1:
        raise RangeError(f"keyphrase count must be positive, got {n}")
    # tokenized sentences with per-token candidacy and raw spans
    sentence_records = []  # (region_id, topic, [(word, start, end, cand)])
    vocab: dict[str, int] = {}
    for region in regions:
        for topic, paragraph in region.sections:
            for sentence in _sentences(paragraph):
                tokens = []
                for m in _TOKEN.finditer(sentence):
                    word = m.group(0).lower()
                    cand = _is_candidate(word)
                    if cand and word not in vocab:
                        vocab[word] = len(vocab)
                    tokens.append((word, m.start(), m.end(), cand))
                if tokens:
                    sentence_records.append((region.region_id, topic, sentence, tokens))
    if not vocab:
        return KeyphraseList(entries=(), n=n)

    edges: set[tuple[int, int]] = set()
    for _, _, _, tokens in sentence_records:
        cands = [vocab[w] for w, _, _, c in tokens if c]
        for i, a in enumerate(cands):
            for b in cands[i + 1 : i + WINDOW]:
                if a != b:
                    edges.add((min(a, b), max(a, b)))
    rank = _pagerank(len(vocab), edges)

    n_top = max(1, len(vocab) // 3)
    top_words = set(
        sorted(vocab, key=lambda w: (-rank[vocab[w]], w))[:n_top]
    )

    # merge adjacent top words (whitespace-only gaps) into phrases
    phrases: dict[str, dict] = {}
    for region_id, topic, sentence, tokens in sentence_records:
        run: list[tuple[str, int, int]] = []

        def flush():
            if not run:
                return
            phrase = " ".join(w for w, _, _ in run)
            score = float(sum(rank[vocab[w]] for w, _, _ in run))
            entry = phrases.setdefault(
                phrase,
                {"score": score, "origin": (region_id, topic), "regions": set()},
            )
            entry["regions"].add(region_id)
            if (region_id, topic) < entry["origin"]:
                entry["origin"] = (region_id, topic)

        prev_end = None
        for word, start, end, cand in tokens:
            top = cand and word in top_words
            contiguous = (
                prev_end is not None and sentence[prev_end:start].strip() == ""
            )
            if top and (not run or contiguous):
                run.append((word, start, end))
            else:
                flush()
                run = [(word, start, end)] if top else []
            prev_end = end
        flush()

    entries = [
        KeyphraseEntry(
            phrase=phrase,
            score=info["score"],
            topic=info["origin"][1],
            region_ids=tuple(sorted(info["regions"])),
        )
        for phrase, info in phrases.items()
    ]
    entries.sort(key=lambda e: (-e.score, e.phrase))
    return KeyphraseList(entries=tuple(entries[:n]), n=n)


def find_paragraphs(
    regions: Sequence[RegionDocuments], phrase: str
) -> tuple[ParagraphMatch, ...]:
    """Case-insensitive whole-phrase lookup with match offsets."""
    words = phrase.split()
    if not words:
        raise RangeError("phrase must be non-empty")
    pattern = re.compile(
        r"\b" + r"\s+".join(re.escape(w) for w in words) + r"\b",
        re.IGNORECASE,
    )
    out = []
    for region in regions:
        for topic, paragraph in region.sections:
            offsets = tuple(
                (m.start(), m.end()) for m in pattern.finditer(paragraph)
            )
            if offsets:
                out.append(
                    ParagraphMatch(
                        region_id=region.region_id,
                        topic=topic,
                        paragraph=paragraph,
                        offsets=offsets,
                    )
                )
    return tuple(out)
