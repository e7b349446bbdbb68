"""Host adapter between a negative-prompt controller and a real diffusion
pipeline + VLM, over a line-delimited wire protocol.

Library layout:
  protocol  -- message schema, encode/decode, per-direction ordering rules
  decode    -- linear latent-to-RGB preview decoding (preset 4-channel map)
  backends  -- pluggable VLM backends (fixture-echo stub, HTTP client)
  pipeline  -- hosted pipelines (deterministic scripted fake)
  session   -- the per-step loop, transcript, runtime report, `serve`
  cli       -- `bridge serve --config <path> --controller-cmd <argv>`
"""

__version__ = "0.1.0"

from .decode import SDXL_PREVIEW_MATRIX, linear_decode
from .protocol import BridgeMessage
from .session import Session, SessionConfig, serve

__all__ = [
    "SDXL_PREVIEW_MATRIX",
    "linear_decode",
    "BridgeMessage",
    "Session",
    "SessionConfig",
    "serve",
]
