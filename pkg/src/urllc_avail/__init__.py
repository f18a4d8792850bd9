"""Reliability, availability and available-range analysis for short-packet relaying modes."""

from .channel import ChannelParams, LinkGeometry, ShadowingDraw
from .fbl import CodeSpec, LinearizedQ
from .mc import McEstimate
from .modes import DelayBudget, LargeScaleTriple, ModeId, ProcessingModel, SystemParams

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "CodeSpec",
    "DelayBudget",
    "LargeScaleTriple",
    "LinearizedQ",
    "LinkGeometry",
    "McEstimate",
    "ModeId",
    "ProcessingModel",
    "ShadowingDraw",
    "SystemParams",
]
