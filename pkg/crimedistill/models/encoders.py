import logging
import math

import torch
import torch.nn as nn

from ..errors import DataError
from .types import Backbone, EncoderConfig, SequenceBatch

_LOG = logging.getLogger("crimedistill.models")


class SequenceEncoder(nn.Module):
    """Maps a padded id sequence to logits over the real event classes at the mask slot.

    The output layer is tied to the input embedding and only the first
    `vocab_size` rows are scored, so pad and mask never receive probability.
    """

    def __init__(self, config: EncoderConfig, state_dim: int) -> None:
        super().__init__()
        self.config = config
        self.item_embedding = nn.Embedding(config.total_tokens, config.embed_dim, padding_idx=config.pad_id)
        self.embed_dropout = nn.Dropout(config.dropout)
        self.head = nn.Sequential(
            nn.Linear(state_dim, config.embed_dim),
            nn.GELU(),
            nn.LayerNorm(config.embed_dim),
        )
        self.output_bias = nn.Parameter(torch.zeros(config.vocab_size))

    def hidden_states(self, batch: SequenceBatch) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, batch: SequenceBatch) -> torch.Tensor:
        states = self.hidden_states(batch)
        rows = torch.arange(states.shape[0], device=states.device)
        return self.score(states[rows, batch.predict_pos])

    def score(self, state: torch.Tensor) -> torch.Tensor:
        projected = self.head(state)
        class_rows = self.item_embedding.weight[: self.config.vocab_size]
        return projected @ class_rows.t() + self.output_bias


class TransformerEncoder(SequenceEncoder):
    """Bidirectional self-attention over the history plus the mask token."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__(config, state_dim=config.embed_dim)
        self.position_embedding = nn.Embedding(config.max_len, config.embed_dim)
        self.input_norm = nn.LayerNorm(config.embed_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=config.embed_dim,
            nhead=config.num_heads,
            dim_feedforward=config.hidden_dim,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=config.num_layers, enable_nested_tensor=False)

    def hidden_states(self, batch: SequenceBatch) -> torch.Tensor:
        seq_len = batch.ids.shape[1]
        positions = torch.arange(seq_len, device=batch.ids.device).unsqueeze(0)
        x = self.item_embedding(batch.ids) + self.position_embedding(positions)
        x = self.embed_dropout(self.input_norm(x))
        return self.encoder(x, src_key_padding_mask=~batch.attention_keep)


class GRUEncoder(SequenceEncoder):
    """Left-to-right GRU; the state at the mask slot is the last non-pad state."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__(config, state_dim=config.hidden_dim)
        self.gru = nn.GRU(
            input_size=config.embed_dim,
            hidden_size=config.hidden_dim,
            num_layers=config.num_layers,
            batch_first=True,
            dropout=config.dropout if config.num_layers > 1 else 0.0,
        )

    def hidden_states(self, batch: SequenceBatch) -> torch.Tensor:
        x = self.embed_dropout(self.item_embedding(batch.ids))
        outputs, _ = self.gru(x)
        return outputs


class _Chomp(nn.Module):
    def __init__(self, size: int) -> None:
        super().__init__()
        self.size = size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x[:, :, : -self.size].contiguous() if self.size else x


class TemporalBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, dilation: int, dropout: float) -> None:
        super().__init__()
        padding = (kernel_size - 1) * dilation
        self.net = nn.Sequential(
            nn.Conv1d(in_channels, out_channels, kernel_size, padding=padding, dilation=dilation),
            _Chomp(padding),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Conv1d(out_channels, out_channels, kernel_size, padding=padding, dilation=dilation),
            _Chomp(padding),
            nn.ReLU(),
            nn.Dropout(dropout),
        )
        self.downsample = nn.Conv1d(in_channels, out_channels, 1) if in_channels != out_channels else None
        self.relu = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.net(x)
        res = x if self.downsample is None else self.downsample(x)
        return self.relu(out + res)


def tcn_depth(config: EncoderConfig) -> int:
    """Blocks needed so the causal receptive field spans max_len (never fewer than num_layers)."""
    per_level = 2 * (config.kernel_size - 1)
    needed = math.ceil(math.log2((config.max_len - 1) / per_level + 1)) if config.max_len > 1 else 1
    return max(config.num_layers, needed)


class TCNEncoder(SequenceEncoder):
    """Causal dilated convolutions; right padding never reaches earlier positions."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__(config, state_dim=config.hidden_dim)
        blocks = []
        for level in range(tcn_depth(config)):
            blocks.append(
                TemporalBlock(
                    in_channels=config.embed_dim if level == 0 else config.hidden_dim,
                    out_channels=config.hidden_dim,
                    kernel_size=config.kernel_size,
                    dilation=2**level,
                    dropout=config.dropout,
                )
            )
        self.network = nn.Sequential(*blocks)

    def hidden_states(self, batch: SequenceBatch) -> torch.Tensor:
        x = self.embed_dropout(self.item_embedding(batch.ids))
        return self.network(x.transpose(1, 2)).transpose(1, 2)


ENCODERS = {
    Backbone.TRANSFORMER: TransformerEncoder,
    Backbone.GRU: GRUEncoder,
    Backbone.TCN: TCNEncoder,
}


def _init_weights(model: SequenceEncoder) -> None:
    config = model.config
    bound = 1.0 / math.sqrt(config.embed_dim)
    nn.init.uniform_(model.item_embedding.weight, -bound, bound)
    with torch.no_grad():
        model.item_embedding.weight[config.pad_id].zero_()

    if isinstance(model, TransformerEncoder):
        nn.init.trunc_normal_(model.position_embedding.weight, std=0.02)
        for module in model.encoder.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
        # the fused q/k/v projection is a raw parameter, not a Linear
        for name, param in model.encoder.named_parameters():
            if name.endswith("in_proj_weight"):
                nn.init.trunc_normal_(param, std=0.02)
            elif name.endswith("in_proj_bias"):
                nn.init.zeros_(param)

    for module in model.head.modules():
        if isinstance(module, nn.Linear):
            nn.init.trunc_normal_(module.weight, std=0.02)
            nn.init.zeros_(module.bias)


def init_params(config: EncoderConfig, seed: int) -> SequenceEncoder:
    """Build an encoder whose parameters depend only on `config` and `seed`."""
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ENCODERS[config.kind](config)
        _init_weights(model)
    _LOG.debug(
        "Initialised %s encoder with %d parameters (seed %d)",
        config.kind.value,
        sum(p.numel() for p in model.parameters()),
        seed,
    )
    return model


def encode(batch: SequenceBatch, model: SequenceEncoder) -> torch.Tensor:
    config = model.config
    if batch.ids.numel() and (batch.ids.min() < 0 or batch.ids.max() >= config.total_tokens):
        raise DataError(f"token id outside [0, {config.total_tokens}) in batch")
    if batch.ids.shape[1] > config.max_len:
        raise DataError(f"sequence length {batch.ids.shape[1]} exceeds max_len {config.max_len}")
    return model(batch)

