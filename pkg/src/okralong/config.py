"""Engine configuration: INI-style file with sections, overridden by CLI flags.

Secrets never live in the file; the API key comes from the OKRA_API_KEY
environment variable.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .planner import DEFAULT_MAX_STEPS, PlannerOptions
from .retrieval import DEFAULT_THRESHOLD
from .tokenization import DEFAULT_TOKENIZER_ID

MODES = ("okra", "std-rag", "long-context")


@dataclass(frozen=True)
class EngineConfig:
    corpus_path: str | None = None
    index_dir: str = "index"
    tokenizer_id: str = DEFAULT_TOKENIZER_ID
    mode: str = "okra"

    analyzer_backend: str = "heuristic"  # heuristic | remote-lm
    analyzer_model: str | None = None
    analyzer_endpoint: str | None = None

    gateway_backend: str = "mock"  # mock | remote
    gateway_endpoint: str | None = None
    gateway_model: str | None = None
    mock_script: str | None = None

    planner: PlannerOptions = field(default_factory=PlannerOptions)
    bench_parallelism: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "corpus": self.corpus_path,
            "index_dir": self.index_dir,
            "tokenizer": self.tokenizer_id,
            "analyzer": self.analyzer_backend,
            "gateway": self.gateway_backend,
            "precise_mode": self.planner.precise_mode,
            "max_steps": self.planner.max_steps,
        }


def _weight_pair(raw: str) -> tuple[float, float]:
    parts = [float(p) for p in raw.replace(":", ",").split(",")]
    if len(parts) != 2:
        raise ValueError(f"weight pair must have two components: {raw!r}")
    return (parts[0], parts[1])


def load_config(path: str | Path | None) -> EngineConfig:
    """Parse the config file; absent file or None yields defaults."""
    config = EngineConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(Path(path))
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    def get(section: str, key: str, fallback=None):
        return parser.get(section, key, fallback=fallback)

    planner = PlannerOptions(
        precise_mode=parser.getboolean("planner", "precise_mode", fallback=False),
        max_steps=parser.getint("planner", "max_steps", fallback=DEFAULT_MAX_STEPS),
        threshold=parser.getfloat("planner", "threshold", fallback=DEFAULT_THRESHOLD),
        weights_exact=_weight_pair(get("planner", "weights.exact", "0.6,0.4")),
        weights_semantic=_weight_pair(get("planner", "weights.semantic", "0.4,0.6")),
        weights_same=_weight_pair(get("planner", "weights.same", "0.5,0.5")),
    )
    return replace(
        config,
        corpus_path=get("corpus", "path"),
        index_dir=get("corpus", "index_dir", "index"),
        tokenizer_id=get("corpus", "tokenizer", DEFAULT_TOKENIZER_ID),
        mode=get("engine", "mode", "okra"),
        analyzer_backend=get("analyzer", "backend", "heuristic"),
        analyzer_model=get("analyzer", "model"),
        analyzer_endpoint=get("analyzer", "endpoint"),
        gateway_backend=get("gateway", "backend", "mock"),
        gateway_endpoint=get("gateway", "endpoint"),
        gateway_model=get("gateway", "model"),
        mock_script=get("gateway", "mock_script"),
        planner=planner,
        bench_parallelism=parser.getint("bench", "parallelism", fallback=1),
    )
