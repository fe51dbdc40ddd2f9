"""Flow-based lossy compression of event-camera streams."""

from .model import CodecConfig, Event, EventStream, FlowEvent, Polarity
from .pipeline import simulate
from .receiver import reconstruct
from .transmitter import Transmitter, compress_stream

__version__ = "0.1.0"

__all__ = [
    "CodecConfig",
    "Event",
    "EventStream",
    "FlowEvent",
    "Polarity",
    "Transmitter",
    "compress_stream",
    "reconstruct",
    "simulate",
]
