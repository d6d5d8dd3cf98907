"""Flat key=value configuration for the service and CLI.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Secrets never live in the file, only the name of the env var holding them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .clustering import ClusterParams
from .contentgen import GenParams
from .providers import ProviderConfig
from .retrieval import RetrievalParams

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class EngineConfig:
    corpus_path: str = ""
    index_path: str = ""
    sessions_dir: str = "sessions"
    link_template: str = "https://hudoc.echr.coe.int/eng?i={id}"
    ui_dir: str = ""
    mock: bool = True
    dimension: int = 256
    chat: ProviderConfig = field(default_factory=ProviderConfig)
    embed: ProviderConfig = field(default_factory=ProviderConfig)
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)
    clustering: ClusterParams = field(default_factory=ClusterParams)
    generation: GenParams = field(default_factory=GenParams)
    index_batch_size: int = 10
    reorganize: bool = True


def load_config(path: str | Path) -> EngineConfig:
    kv = parse_kv(Path(path).read_text(encoding="utf-8"))
    cfg = EngineConfig()

    def take(key: str, cast=str, default=None):
        if key in kv:
            value = kv.pop(key)
            if cast is bool:
                return _BOOL[value.lower()]
            return cast(value)
        return default

    cfg.corpus_path = take("corpus_path", str, cfg.corpus_path)
    cfg.index_path = take("index_path", str, cfg.index_path)
    cfg.sessions_dir = take("sessions_dir", str, cfg.sessions_dir)
    cfg.link_template = take("link_template", str, cfg.link_template)
    cfg.ui_dir = take("ui_dir", str, cfg.ui_dir)
    cfg.mock = take("mock", bool, cfg.mock)
    cfg.dimension = take("dimension", int, cfg.dimension)
    cfg.index_batch_size = take("index_batch_size", int, cfg.index_batch_size)
    cfg.reorganize = take("reorganize", bool, cfg.reorganize)

    for name, pc in (("chat", cfg.chat), ("embed", cfg.embed)):
        pc.endpoint_url = take(f"{name}_endpoint_url", str, pc.endpoint_url)
        pc.model_id = take(f"{name}_model_id", str, pc.model_id)
        pc.api_key_env_var = take(f"{name}_api_key_env_var", str, pc.api_key_env_var)
        pc.timeout = take(f"{name}_timeout", float, pc.timeout)
        pc.max_retries = take(f"{name}_max_retries", int, pc.max_retries)
        pc.max_in_flight = take(f"{name}_max_in_flight", int, pc.max_in_flight)

    cfg.retrieval = RetrievalParams(
        k=take("k", int, cfg.retrieval.k),
        fetch_k=take("fetch_k", int, cfg.retrieval.fetch_k),
        lambda_=take("lambda", float, cfg.retrieval.lambda_),
        sim_threshold=take("sim_threshold", float, cfg.retrieval.sim_threshold),
        mode=take("retrieval_mode", str, cfg.retrieval.mode),
    )
    cfg.clustering = ClusterParams(
        min_cluster_size=take("min_cluster_size", int, cfg.clustering.min_cluster_size),
        min_samples=take("min_samples", int, cfg.clustering.min_samples),
    )
    cfg.generation = GenParams(
        per_section_m=take("per_section_m", int, cfg.generation.per_section_m),
        batch_size=take("gen_batch_size", int, cfg.generation.batch_size),
        max_iterations=take("max_iterations", int, cfg.generation.max_iterations),
    )
    if kv:
        raise ValueError(f"unknown config keys: {', '.join(sorted(kv))}")
    return cfg
