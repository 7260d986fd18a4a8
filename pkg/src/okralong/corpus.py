"""Document ingestion, token-bounded chunking, and granularity-keyed indexes."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import CorpusError, DuplicateDocIdError, MalformedRecordError
from .tokenization import DEFAULT_TOKENIZER_ID, Tokenizer, get_tokenizer


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    source_name: str | None = None


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    token_span: tuple[int, int]
    char_span: tuple[int, int]
    text: str
    granularity: int

    @property
    def token_length(self) -> int:
        return self.token_span[1] - self.token_span[0]


class ChunkIndex:
    """Immutable chunk table for one (corpus, granularity) pair."""

    def __init__(self, granularity: int, chunks: list[Chunk]) -> None:
        self.granularity = granularity
        self.chunks = chunks
        self._by_id = {c.chunk_id: c for c in chunks}
        self.doc_lookup: dict[str, tuple[int, int]] = {}
        for pos, chunk in enumerate(chunks):
            if chunk.doc_id not in self.doc_lookup:
                self.doc_lookup[chunk.doc_id] = (pos, pos + 1)
            else:
                start, _ = self.doc_lookup[chunk.doc_id]
                self.doc_lookup[chunk.doc_id] = (start, pos + 1)

    def __len__(self) -> int:
        return len(self.chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    def get(self, chunk_id: str) -> Chunk:
        try:
            return self._by_id[chunk_id]
        except KeyError:
            raise CorpusError(f"chunk not in index: {chunk_id!r}") from None

    def doc_chunks(self, doc_id: str) -> list[Chunk]:
        span = self.doc_lookup.get(doc_id)
        if span is None:
            return []
        return self.chunks[span[0] : span[1]]

    def neighbors(self, chunk: Chunk, radius: int) -> list[Chunk]:
        """Up to 2*radius+1 same-document chunks centered on `chunk`."""
        if chunk.chunk_id not in self._by_id:
            raise CorpusError(f"chunk not in index: {chunk.chunk_id!r}")
        doc = self.doc_chunks(chunk.doc_id)
        lo = max(0, chunk.ordinal - radius)
        hi = min(len(doc), chunk.ordinal + radius + 1)
        return doc[lo:hi]


def chunk_document(doc: Document, granularity: int, tokenizer: Tokenizer) -> list[Chunk]:
    """Cut a document into non-overlapping chunks of at most `granularity` tokens.

    Chunk boundaries fall on token boundaries; inter-token whitespace is
    carried by the chunk that follows it, so concatenating chunk texts in
    ordinal order reconstructs the document exactly.
    """
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    if not doc.text:
        return []
    spans = tokenizer.spans(doc.text)
    if not spans:
        # Non-empty text with zero tokens (whitespace only): keep as one chunk
        # so the round-trip invariant holds.
        return [
            Chunk(
                chunk_id=_chunk_id(doc.doc_id, granularity, 0),
                doc_id=doc.doc_id,
                ordinal=0,
                token_span=(0, 0),
                char_span=(0, len(doc.text)),
                text=doc.text,
                granularity=granularity,
            )
        ]

    chunks: list[Chunk] = []
    char_cursor = 0
    n = len(spans)
    for ordinal, tok_start in enumerate(range(0, n, granularity)):
        tok_end = min(tok_start + granularity, n)
        char_end = len(doc.text) if tok_end == n else spans[tok_end - 1][1]
        chunks.append(
            Chunk(
                chunk_id=_chunk_id(doc.doc_id, granularity, ordinal),
                doc_id=doc.doc_id,
                ordinal=ordinal,
                token_span=(tok_start, tok_end),
                char_span=(char_cursor, char_end),
                text=doc.text[char_cursor:char_end],
                granularity=granularity,
            )
        )
        char_cursor = char_end
    return chunks


def _chunk_id(doc_id: str, granularity: int, ordinal: int) -> str:
    return f"{doc_id}/g{granularity}/{ordinal:06d}"


def ingest_corpus(source: str | Path) -> list[Document]:
    """Load a line-delimited corpus file into Documents.

    Each line is a JSON record with `text` (required), `id` and `source`
    (optional). Missing ids are derived from source order.
    """
    path = Path(source)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    documents: list[Document] = []
    seen_ids: set[str] = set()
    for line_number, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(line_number, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise MalformedRecordError(line_number, "record is not an object")
        if "text" not in record or not isinstance(record["text"], str):
            raise MalformedRecordError(line_number, "missing required string field 'text'")
        doc_id = record.get("id")
        if doc_id is None:
            doc_id = f"doc-{len(documents):06d}"
        elif not isinstance(doc_id, str):
            raise MalformedRecordError(line_number, "'id' must be a string")
        if doc_id in seen_ids:
            raise DuplicateDocIdError(doc_id)
        seen_ids.add(doc_id)
        documents.append(Document(doc_id=doc_id, text=record["text"], source_name=record.get("source")))
    return documents


@dataclass
class CorpusStore:
    """Owns a corpus and its per-granularity chunk indexes.

    Index construction is cached per granularity and serialized; indexes are
    immutable after construction and safe to share across readers.
    """

    documents: list[Document]
    tokenizer: Tokenizer = field(default_factory=lambda: get_tokenizer(DEFAULT_TOKENIZER_ID))

    def __post_init__(self) -> None:
        self._indexes: dict[int, ChunkIndex] = {}
        self._lock = threading.Lock()
        self.build_count = 0
        self._build_listeners: list[Callable[[ChunkIndex], None]] = []
        ids = [d.doc_id for d in self.documents]
        if len(ids) != len(set(ids)):
            dupes = {i for i in ids if ids.count(i) > 1}
            raise DuplicateDocIdError(sorted(dupes)[0])

    def on_index_built(self, listener: Callable[[ChunkIndex], None]) -> None:
        """Register a callback run once per freshly built index (e.g. retriever builds)."""
        self._build_listeners.append(listener)

    def rescale_index(self, granularity: int) -> ChunkIndex:
        """Return the cached index at `granularity`, building it on first request."""
        if granularity < 1:
            raise ValueError("granularity must be >= 1")
        with self._lock:
            cached = self._indexes.get(granularity)
            if cached is not None:
                return cached
            chunks: list[Chunk] = []
            for doc in self.documents:
                chunks.extend(chunk_document(doc, granularity, self.tokenizer))
            index = ChunkIndex(granularity, chunks)
            self._indexes[granularity] = index
            self.build_count += 1
        for listener in self._build_listeners:
            listener(index)
        return index

    @property
    def granularities(self) -> list[int]:
        return sorted(self._indexes)

    def document(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.doc_id == doc_id:
                return doc
        raise CorpusError(f"unknown doc_id: {doc_id!r}")

    def total_tokens(self) -> int:
        return sum(self.tokenizer.count(d.text) for d in self.documents)

    # -- persistence ---------------------------------------------------

    def save(self, directory: str | Path) -> None:
        """Persist the manifest plus one chunk table per built granularity."""
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        manifest = {
            "tokenizer_id": self.tokenizer.tokenizer_id,
            "granularities": self.granularities,
            "num_documents": len(self.documents),
        }
        (root / "manifest").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        for granularity, index in self._indexes.items():
            with (root / f"chunks_{granularity}.jsonl").open("w", encoding="utf-8") as fh:
                for c in index.chunks:
                    fh.write(
                        json.dumps(
                            {
                                "chunk_id": c.chunk_id,
                                "doc_id": c.doc_id,
                                "ordinal": c.ordinal,
                                "char_start": c.char_span[0],
                                "char_end": c.char_span[1],
                                "token_start": c.token_span[0],
                                "token_end": c.token_span[1],
                            }
                        )
                        + "\n"
                    )

    def load(self, directory: str | Path) -> None:
        """Rehydrate persisted chunk tables; documents must already be loaded."""
        root = Path(directory)
        manifest = json.loads((root / "manifest").read_text(encoding="utf-8"))
        if manifest["tokenizer_id"] != self.tokenizer.tokenizer_id:
            raise CorpusError(
                f"index built with tokenizer {manifest['tokenizer_id']!r}, "
                f"active tokenizer is {self.tokenizer.tokenizer_id!r}"
            )
        docs = {d.doc_id: d for d in self.documents}
        for granularity in manifest["granularities"]:
            chunks: list[Chunk] = []
            with (root / f"chunks_{granularity}.jsonl").open(encoding="utf-8") as fh:
                for line in fh:
                    row = json.loads(line)
                    doc = docs.get(row["doc_id"])
                    if doc is None:
                        raise CorpusError(f"persisted chunk references unknown doc {row['doc_id']!r}")
                    chunks.append(
                        Chunk(
                            chunk_id=row["chunk_id"],
                            doc_id=row["doc_id"],
                            ordinal=row["ordinal"],
                            token_span=(row["token_start"], row["token_end"]),
                            char_span=(row["char_start"], row["char_end"]),
                            text=doc.text[row["char_start"] : row["char_end"]],
                            granularity=granularity,
                        )
                    )
            with self._lock:
                self._indexes[granularity] = ChunkIndex(granularity, chunks)


def load_manifest(directory: str | Path) -> dict | None:
    path = Path(directory) / "manifest"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
