"""Sparse (BM25) and dense retrieval with weighted score fusion.

The fused relevance of a chunk is w_exact * exact_score + w_semantic *
semantic_score over min-max normalized per-strategy scores, with a relative
threshold against the top-ranked fused score.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .corpus import Chunk, ChunkIndex
from .errors import RetrievalError

_WORD_RE = re.compile(r"\w+")

BM25_K1 = 1.2
BM25_B = 0.75

DEFAULT_FUSION_POOL = 20
DEFAULT_THRESHOLD = 0.1


def _terms(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    raw_score: float
    normalized_score: float | None = None


@dataclass(frozen=True)
class FusionWeights:
    """Non-negative strategy weights, stored normalized to sum 1."""

    w_exact: float
    w_semantic: float

    def __post_init__(self) -> None:
        if self.w_exact < 0 or self.w_semantic < 0:
            raise ValueError("fusion weights must be non-negative")
        total = self.w_exact + self.w_semantic
        if total <= 0:
            raise ValueError("fusion weights must not both be zero")
        object.__setattr__(self, "w_exact", self.w_exact / total)
        object.__setattr__(self, "w_semantic", self.w_semantic / total)


@dataclass(frozen=True)
class RankedContext:
    """Fused ranking, descending score, ties broken by lower chunk_id."""

    entries: tuple[tuple[ScoredChunk, float], ...]  # (scored chunk, fused score)
    fusion_weights: FusionWeights
    threshold_applied: float

    @property
    def chunk_ids(self) -> list[str]:
        return [sc.chunk_id for sc, _ in self.entries]


class SparseIndex:
    """Okapi BM25 inverted index over chunk tokens (k1=1.2, b=0.75)."""

    def __init__(self, index: ChunkIndex) -> None:
        self.chunk_ids = [c.chunk_id for c in index.chunks]
        self._tf: list[Counter[str]] = []
        self._doc_len: list[int] = []
        self._df: Counter[str] = Counter()
        for chunk in index.chunks:
            terms = _terms(chunk.text)
            tf = Counter(terms)
            self._tf.append(tf)
            self._doc_len.append(len(terms))
            self._df.update(tf.keys())
        self._n = len(index.chunks)
        self._avgdl = (sum(self._doc_len) / self._n) if self._n else 0.0

    def _idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        if df == 0:
            return 0.0
        return math.log((self._n - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query: str, limit: int) -> list[ScoredChunk]:
        """Top-`limit` chunks by BM25 score; zero-score chunks are dropped."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        query_terms = _terms(query)
        if not query_terms or not self._n:
            return []
        scores: dict[int, float] = {}
        for term in query_terms:
            idf = self._idf(term)
            if idf == 0.0:
                continue
            for pos, tf in enumerate(self._tf):
                freq = tf.get(term)
                if not freq:
                    continue
                denom = freq + BM25_K1 * (1 - BM25_B + BM25_B * self._doc_len[pos] / self._avgdl)
                scores[pos] = scores.get(pos, 0.0) + idf * freq * (BM25_K1 + 1) / denom
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], self.chunk_ids[kv[0]]))
        return [ScoredChunk(self.chunk_ids[pos], s) for pos, s in ranked[:limit] if s > 0]


class EmbeddingProvider(Protocol):
    """Produces fixed-dimension vectors for a batch of texts."""

    provider_id: str

    def embed(self, texts: list[str]) -> np.ndarray: ...


class HashingEmbeddingProvider:
    """Deterministic feature-hashing bag-of-tokens embeddings.

    Hermetic stand-in for a remote embedding model: each token hashes to a
    signed bucket, so identical texts always map to identical vectors.
    """

    provider_id = "hashing-256"

    def __init__(self, dimension: int = 256, seed: str = "okra") -> None:
        self.dimension = dimension
        self._seed = seed

    def _bucket(self, term: str) -> tuple[int, float]:
        digest = hashlib.md5(f"{self._seed}:{term}".encode()).digest()
        bucket = int.from_bytes(digest[:4], "big") % self.dimension
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return bucket, sign

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for row, text in enumerate(texts):
            for term, count in Counter(_terms(text)).items():
                bucket, sign = self._bucket(term)
                out[row, bucket] += sign * count
        return out


class RemoteEmbeddingProvider:
    """OpenAI-compatible embeddings endpoint client."""

    provider_id = "remote"

    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def embed(self, texts: list[str]) -> np.ndarray:
        import httpx

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                f"{self.base_url}/embeddings",
                json={"input": texts, "model": self.model},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            data = response.json()["data"]
        except Exception as exc:
            raise RetrievalError(f"embedding provider failed: {exc}") from exc
        return np.array([row["embedding"] for row in data], dtype=np.float64)


class DenseIndex:
    """Exhaustive cosine-similarity scorer over precomputed chunk vectors."""

    def __init__(self, index: ChunkIndex, provider: EmbeddingProvider) -> None:
        self.chunk_ids = [c.chunk_id for c in index.chunks]
        self._provider = provider
        if index.chunks:
            vectors = provider.embed([c.text for c in index.chunks])
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            norms[norms == 0] = 1.0  # zero vectors score 0 against everything
            self._unit = vectors / norms
            self._zero_mask = np.all(vectors == 0, axis=1)
        else:
            self._unit = np.zeros((0, 1))
            self._zero_mask = np.zeros(0, dtype=bool)

    def score(self, query: str, limit: int) -> list[ScoredChunk]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        if not self.chunk_ids:
            return []
        qvec = self._provider.embed([query])[0]
        qnorm = np.linalg.norm(qvec)
        if qnorm == 0:
            sims = np.zeros(len(self.chunk_ids))
        else:
            sims = self._unit @ (qvec / qnorm)
            sims[self._zero_mask] = 0.0
        order = sorted(range(len(sims)), key=lambda i: (-sims[i], self.chunk_ids[i]))
        return [ScoredChunk(self.chunk_ids[i], float(sims[i])) for i in order[:limit]]


def minmax_normalize(scores: list[ScoredChunk]) -> list[ScoredChunk]:
    """Rescale raw scores linearly to [0, 1], preserving order.

    Degenerate inputs (singleton or all-equal) normalize to 1.0 so that the
    only available evidence survives the relative threshold.
    """
    if not scores:
        return []
    raws = [s.raw_score for s in scores]
    lo, hi = min(raws), max(raws)
    if hi == lo:
        return [ScoredChunk(s.chunk_id, s.raw_score, 1.0) for s in scores]
    return [ScoredChunk(s.chunk_id, s.raw_score, (s.raw_score - lo) / (hi - lo)) for s in scores]


def fuse_and_rank(
    exact: list[ScoredChunk],
    semantic: list[ScoredChunk],
    weights: FusionWeights,
    threshold: float = DEFAULT_THRESHOLD,
    limit: int = 5,
) -> RankedContext:
    """Weighted fusion of normalized exact and semantic rankings.

    Inputs must already be truncated to the fusion pool and min-max
    normalized. A chunk missing from one side contributes 0 from that side.
    Entries scoring below threshold * top-1 are dropped, then the ranking is
    truncated to `limit`.
    """
    if not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    exact_by_id = {s.chunk_id: s for s in exact}
    semantic_by_id = {s.chunk_id: s for s in semantic}
    fused: list[tuple[ScoredChunk, float]] = []
    for chunk_id in set(exact_by_id) | set(semantic_by_id):
        e = exact_by_id.get(chunk_id)
        s = semantic_by_id.get(chunk_id)
        e_score = (e.normalized_score or 0.0) if e else 0.0
        s_score = (s.normalized_score or 0.0) if s else 0.0
        fused_score = weights.w_exact * e_score + weights.w_semantic * s_score
        raw = e.raw_score if e else (s.raw_score if s else 0.0)
        fused.append((ScoredChunk(chunk_id, raw, max(e_score, s_score)), fused_score))
    fused.sort(key=lambda pair: (-pair[1], pair[0].chunk_id))
    if fused:
        cutoff = threshold * fused[0][1]
        fused = [pair for pair in fused if pair[1] >= cutoff]
    return RankedContext(entries=tuple(fused[:limit]), fusion_weights=weights, threshold_applied=threshold)


@dataclass
class RetrievalEngine:
    """Caches sparse and dense retriever handles per chunk index."""

    provider: EmbeddingProvider = field(default_factory=HashingEmbeddingProvider)
    fusion_pool: int = DEFAULT_FUSION_POOL

    def __post_init__(self) -> None:
        self._sparse: dict[int, SparseIndex] = {}
        self._dense: dict[int, DenseIndex] = {}

    def build_for(self, index: ChunkIndex) -> None:
        if id(index) not in self._sparse:
            self._sparse[id(index)] = SparseIndex(index)
            self._dense[id(index)] = DenseIndex(index, self.provider)

    def sparse(self, index: ChunkIndex) -> SparseIndex:
        self.build_for(index)
        return self._sparse[id(index)]

    def dense(self, index: ChunkIndex) -> DenseIndex:
        self.build_for(index)
        return self._dense[id(index)]

    def retrieve(
        self,
        index: ChunkIndex,
        query: str,
        weights: FusionWeights,
        top_k: int,
        threshold: float = DEFAULT_THRESHOLD,
        fusion_pool: int | None = None,
    ) -> RankedContext:
        """Fused retrieval: pool from each strategy, normalize, fuse, rank."""
        pool = fusion_pool or self.fusion_pool
        exact = minmax_normalize(self.sparse(index).score(query, pool))
        semantic = minmax_normalize(self.dense(index).score(query, pool))
        return fuse_and_rank(exact, semantic, weights, threshold, top_k)

    def retrieve_chunks(self, index: ChunkIndex, ranked: RankedContext) -> list[Chunk]:
        return [index.get(chunk_id) for chunk_id in ranked.chunk_ids]
