"""Curriculum mutual distillation for fine-grained sequential crime event prediction."""

from .app import CrimeDistillApp

__all__ = ["CrimeDistillApp"]
