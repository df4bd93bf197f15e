from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import torch

from ..errors import ConfigError


class Backbone(Enum):
    TRANSFORMER = "transformer"
    GRU = "gru"
    TCN = "tcn"

    @classmethod
    def parse(cls, value: "str | Backbone") -> "Backbone":
        if isinstance(value, Backbone):
            return value
        aliases = {
            "bert4rec": cls.TRANSFORMER,
            "gated-recurrent": cls.GRU,
            "temporal-convolutional": cls.TCN,
        }
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError as exc:
            raise ConfigError(f"unknown backbone {value!r}") from exc


@dataclass
class EncoderConfig:
    backbone: str = "transformer"
    num_layers: int = 2
    num_heads: int = 2
    embed_dim: int = 64
    hidden_dim: int = 256  # transformer feed-forward width; recurrent/conv state width
    max_len: int = 200
    vocab_size: int = 0  # real event classes only; pad and mask are added on top
    dropout: float = 0.1
    kernel_size: int = 3

    @property
    def kind(self) -> Backbone:
        return Backbone.parse(self.backbone)

    @property
    def pad_id(self) -> int:
        return self.vocab_size

    @property
    def mask_id(self) -> int:
        return self.vocab_size + 1

    @property
    def total_tokens(self) -> int:
        return self.vocab_size + 2

    def validate(self) -> None:
        kind = self.kind
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be at least 2, got {self.vocab_size}")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be positive")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embed_dim and hidden_dim must be positive")
        if self.max_len < 2:
            raise ConfigError("max_len must leave room for at least one event and the mask token")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if kind is Backbone.TRANSFORMER:
            if self.num_heads < 1 or self.embed_dim % self.num_heads:
                raise ConfigError(
                    f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
                )
        if kind is Backbone.TCN and self.kernel_size < 2:
            raise ConfigError("kernel_size must be at least 2")


@dataclass(frozen=True)
class SequenceBatch:
    ids: torch.Tensor  # [batch, seq_len] long
    attention_keep: torch.Tensor  # [batch, seq_len] bool, False on padding
    predict_pos: torch.Tensor  # [batch] long, index of the mask token

    @classmethod
    def from_histories(
        cls,
        histories: Sequence[Sequence[int]],
        pad_id: int,
        mask_id: int,
        seq_len: int,
        device: "torch.device | str" = "cpu",
    ) -> "SequenceBatch":
        """Append the mask token to each history (keeping the last seq_len - 1 events) and right-pad."""
        ids = torch.full((len(histories), seq_len), pad_id, dtype=torch.long)
        predict_pos = torch.empty(len(histories), dtype=torch.long)
        for row, history in enumerate(histories):
            tail = list(history)[-(seq_len - 1) :] if seq_len > 1 else []
            if tail:
                ids[row, : len(tail)] = torch.as_tensor(tail, dtype=torch.long)
            ids[row, len(tail)] = mask_id
            predict_pos[row] = len(tail)
        keep = ids != pad_id
        return cls(ids=ids.to(device), attention_keep=keep.to(device), predict_pos=predict_pos.to(device))

    def to(self, device: "torch.device | str") -> "SequenceBatch":
        return SequenceBatch(
            ids=self.ids.to(device),
            attention_keep=self.attention_keep.to(device),
            predict_pos=self.predict_pos.to(device),
        )

    def __len__(self) -> int:
        return self.ids.shape[0]
