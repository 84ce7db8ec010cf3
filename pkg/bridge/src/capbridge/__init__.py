"""Protocol server exposing real pretrained models to the caption engine."""

from .models import AudioTextEncoder, BridgeConfig, CausalLM, load_waveform
from .server import Bridge
from .wire import PROTOCOL_VERSION, decode_floats, encode_floats

__version__ = "0.1.0"

__all__ = [
    "AudioTextEncoder",
    "Bridge",
    "BridgeConfig",
    "CausalLM",
    "PROTOCOL_VERSION",
    "decode_floats",
    "encode_floats",
    "load_waveform",
]
