"""Corpus ingestion: normalization, sentence splitting, filtering, sampling.

Raw documents come in as plain text. They are normalized (lowercased,
digits masked, punctuation split off from words), cut into sentence
instances, narrowed down to the sentences that mention a target keyword
as a real noun, and finally carved into a human-coded validation sample
and the remainder.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .errors import ConfigError, SchemaError

# word-internal punctuation like "0000/00" or "0000:00" stays glued;
# everything else becomes its own token
_DIGITS = re.compile(r"\d")

# token sequences that end a sentence
TERMINALS = {".", "!", "?"}

# tokens that commonly precede a non-terminal period in this corpus
DEFAULT_ABBREVIATIONS = frozenset(
    {"bl", "t", "ex", "s", "k", "m", "fl", "dvs", "osv", "etc", "resp",
     "kap", "st", "nr", "jfr", "prop", "bet", "mot", "sou", "ds"}
)


@dataclass(frozen=True)
class Document:
    id: str
    doc_type: str
    year: int
    raw_text: str


@dataclass(frozen=True)
class Instance:
    """One normalized sentence with stable id and document provenance."""

    id: str
    doc_id: str
    text: str

    @property
    def tokens(self) -> list[str]:
        return self.text.split(" ") if self.text else []

    @property
    def token_spans(self) -> list[tuple[int, int]]:
        spans = []
        pos = 0
        for tok in self.tokens:
            start = self.text.index(tok, pos)
            spans.append((start, start + len(tok)))
            pos = start + len(tok)
        return spans


@dataclass(frozen=True)
class PosAnnotation:
    """Per-token part-of-speech tags from an external tagger."""

    instance_id: str
    tags: tuple[str, ...]


def _retokenize(chunk: str) -> list[str]:
    """Split punctuation runs off a whitespace-delimited chunk.

    A single punctuation mark with digits on both sides (date and
    reference formats like 0000/00) stays inside its token.
    """
    parts: list[str] = []
    buf: list[str] = []
    i = 0
    while i < len(chunk):
        if chunk[i].isalnum():
            buf.append(chunk[i])
            i += 1
            continue
        j = i
        while j < len(chunk) and not chunk[j].isalnum():
            j += 1
        run = chunk[i:j]
        if len(run) == 1 and i > 0 and j < len(chunk) and chunk[i - 1].isdigit() and chunk[j].isdigit():
            buf.append(run)
            i = j
            continue
        if buf:
            parts.append("".join(buf))
            buf = []
        parts.append(run)
        i = j
    if buf:
        parts.append("".join(buf))
    return parts


def normalize(text: str) -> str:
    """Lowercase, mask every digit with '0', and space out punctuation.

    Whitespace runs collapse to single spaces. Idempotent.
    """
    text = _DIGITS.sub("0", text.lower())
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_retokenize(chunk))
    return " ".join(tokens)


def split_sentences(
    doc: Document, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[Instance]:
    """Cut a normalized document into sentence instances.

    A terminal-punctuation token ends the sentence unless the preceding
    token is a known abbreviation or a single letter (initials, list
    markers). Instance ids derive from the document id and sentence index.
    """
    tokens = doc.raw_text.split(" ") if doc.raw_text else []
    sentences: list[list[str]] = []
    current: list[str] = []
    for tok in tokens:
        if not tok:
            continue
        current.append(tok)
        if tok and all(c in ".!?" for c in tok):
            prev = current[-2] if len(current) >= 2 else ""
            if prev in abbreviations or (len(prev) == 1 and prev.isalpha()):
                continue
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return [
        Instance(id=f"{doc.id}-{i:04d}", doc_id=doc.id, text=" ".join(sent))
        for i, sent in enumerate(sentences)
        if sent
    ]


def keyword_filter(instances: list[Instance], keywords: list[str]) -> list[Instance]:
    """Keep instances containing at least one keyword as a whole token."""
    if not keywords:
        raise ConfigError("keyword filter needs a nonempty keyword list")
    wanted = {kw.strip().lower() for kw in keywords if kw.strip()}
    if not wanted:
        raise ConfigError("keyword filter needs a nonempty keyword list")
    return [inst for inst in instances if any(tok in wanted for tok in inst.tokens)]


def pos_filter(
    instances: list[Instance],
    pos: dict[str, PosAnnotation],
    keywords: list[str],
    noun_tags: frozenset[str] = frozenset({"nn", "noun"}),
) -> list[Instance]:
    """Keep instances where at least one keyword token is tagged as a noun.

    Every instance must have a part-of-speech annotation covering all of
    its tokens; missing or short annotations are reported together.
    """
    wanted = {kw.strip().lower() for kw in keywords if kw.strip()}
    missing = [inst.id for inst in instances if inst.id not in pos]
    if missing:
        raise SchemaError(f"missing part-of-speech annotations for: {', '.join(missing)}")
    bad = [
        inst.id
        for inst in instances
        if len(pos[inst.id].tags) != len(inst.tokens)
    ]
    if bad:
        raise SchemaError(f"tag count does not match token count for: {', '.join(bad)}")

    kept = []
    for inst in instances:
        tags = pos[inst.id].tags
        for idx, tok in enumerate(inst.tokens):
            if tok in wanted and tags[idx].lower() in noun_tags:
                kept.append(inst)
                break
    return kept


def split_validation(
    instances: list[Instance],
    n: int,
    seed: int,
    exclude_ids: set[str] | None = None,
) -> tuple[list[Instance], list[Instance]]:
    """Deterministically sample a validation set of size n.

    Instances whose ids are excluded (e.g. the few-shot example pool)
    appear in neither output. Both outputs preserve corpus order.
    """
    exclude_ids = exclude_ids or set()
    eligible = [inst for inst in instances if inst.id not in exclude_ids]
    if n > len(eligible):
        raise ConfigError(
            f"cannot sample {n} validation instances from {len(eligible)} eligible"
        )
    rng = Random(seed)
    chosen = set(rng.sample(range(len(eligible)), n))
    validation = [inst for i, inst in enumerate(eligible) if i in chosen]
    remainder = [inst for i, inst in enumerate(eligible) if i not in chosen]
    return validation, remainder


# --- file formats -----------------------------------------------------------


def load_corpus_dir(corpus_dir: str | Path) -> list[Document]:
    """Read a corpus directory: one .txt per document, optional manifest.

    A manifest.tsv (id, type, year, path) overrides discovery; without
    one, every *.txt file becomes a document named after its stem.
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory not found: {corpus_dir}")
    manifest = corpus_dir / "manifest.tsv"
    docs = []
    if manifest.exists():
        for line in manifest.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise SchemaError(f"manifest line needs 4 tab-separated fields: {line!r}")
            doc_id, doc_type, year, rel_path = fields
            path = corpus_dir / rel_path
            if not path.exists():
                raise ConfigError(f"manifest references missing file: {path}")
            docs.append(Document(doc_id, doc_type, int(year), path.read_text(encoding="utf-8")))
    else:
        for path in sorted(corpus_dir.glob("*.txt")):
            docs.append(Document(path.stem, "unknown", 0, path.read_text(encoding="utf-8")))
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise SchemaError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
    return docs


def load_keywords(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"keyword file not found: {path}")
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def load_pos_sidecar(path: str | Path) -> dict[str, PosAnnotation]:
    """Read a tagger sidecar: tab-separated instance id, token index, tag."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"part-of-speech sidecar not found: {path}")
    by_instance: dict[str, dict[int, str]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 tab-separated fields")
        inst_id, idx, tag = fields
        by_instance.setdefault(inst_id, {})[int(idx)] = tag
    out = {}
    for inst_id, tags in by_instance.items():
        if set(tags) != set(range(len(tags))):
            raise SchemaError(f"instance {inst_id!r}: token indices are not contiguous from 0")
        out[inst_id] = PosAnnotation(inst_id, tuple(tags[i] for i in range(len(tags))))
    return out


def write_instances(instances: list[Instance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(
                {"id": inst.id, "doc_id": inst.doc_id, "text": inst.text},
                ensure_ascii=False,
            ) + "\n")


def load_instances(path: str | Path) -> list[Instance]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"instance file not found: {path}")
    instances = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        instances.append(Instance(id=rec["id"], doc_id=rec.get("doc_id", ""), text=rec["text"]))
    seen = set()
    for inst in instances:
        if inst.id in seen:
            raise SchemaError(f"duplicate instance id {inst.id!r}")
        seen.add(inst.id)
    return instances
