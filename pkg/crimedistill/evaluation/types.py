from dataclasses import dataclass, field
from typing import Dict, List

from ..errors import ConfigError


@dataclass
class RankingMetrics:
    hr: Dict[int, float]
    ndcg: Dict[int, float]
    mrr: float
    count: int

    def to_dict(self) -> Dict[str, float]:
        flat: Dict[str, float] = {}
        for n in sorted(self.hr):
            flat[f"HR@{n}"] = self.hr[n]
        for n in sorted(self.ndcg):
            flat[f"NDCG@{n}"] = self.ndcg[n]
        flat["MRR"] = self.mrr
        flat["count"] = self.count
        return flat


@dataclass
class EvalConfig:
    split: str = "test"
    peer_index: int = 0
    both_peers: bool = False
    ns: List[int] = field(default_factory=lambda: [5, 10])
    batch_size: int = 512
    full_ranking: bool = False
    checkpoint: str = "best"  # best | last

    def validate(self) -> None:
        if self.split not in ("val", "validation", "test"):
            raise ConfigError(f"unknown split {self.split!r}")
        if not self.ns or any(n < 1 for n in self.ns):
            raise ConfigError("cutoffs must be positive integers")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.checkpoint not in ("best", "last"):
            raise ConfigError(f"checkpoint must be 'best' or 'last', got {self.checkpoint!r}")
