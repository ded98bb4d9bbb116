"""Embedding exporter: images + prompt strings -> EMB1 table."""

from .emb1 import write_table
from .exporter import ExportManifest, ExportResult, collect_images, export
from .models import ModelLoadError, TinyModel, load_model

__version__ = "0.1.0"
