from crimedistill.distill import DistillConfig
from crimedistill.models import EncoderConfig
from crimedistill.training import TrainerConfig


def tiny_encoder(backbone: str = "transformer", vocab_size: int = 16, max_len: int = 12, dropout: float = 0.0):
    return EncoderConfig(
        backbone=backbone,
        num_layers=1,
        num_heads=2,
        embed_dim=16,
        hidden_dim=32,
        max_len=max_len,
        vocab_size=vocab_size,
        dropout=dropout,
    )


def tiny_trainer(peers: int = 2, epochs: int = 2, **distill) -> TrainerConfig:
    return TrainerConfig(
        epochs=epochs,
        batch_size=32,
        seed=3,
        progress=False,
        distill=DistillConfig(peers=peers, **distill),
        encoders=[tiny_encoder() for _ in range(peers)],
    )
