"""Converter from pretrained EDSR PyTorch checkpoints to SRW1 weight files."""

from .convert import (
    CheckpointDescriptor,
    ConversionError,
    build_checkpoint_descriptor,
    export_checkpoint,
    load_state_dict,
    read_srw1,
    verify_export,
)

__all__ = [
    "CheckpointDescriptor",
    "ConversionError",
    "build_checkpoint_descriptor",
    "export_checkpoint",
    "load_state_dict",
    "read_srw1",
    "verify_export",
]
