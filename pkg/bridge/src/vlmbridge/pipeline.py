"""Pipelines the bridge can host.

A pipeline exposes one method: ``step(step, negative_prompt) -> latent``,
returning the C x H x W latent after that denoising step with the given
negative prompt in effect. The shipped ScriptedPipeline generates
deterministic latents for tests and protocol work; hosting a real
diffusion pipeline means implementing the same one-method interface around
its per-step callback.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class ScriptedPipeline:
    """Deterministic fake: latents are drawn once from a seeded generator
    and replayed per step; received negative prompts are recorded so tests
    can assert the pass-through."""

    def __init__(self, steps: int, channels: int = 4, height: int = 2,
                 width: int = 2, seed: int = 0):
        if steps < 1:
            raise ConfigError("scripted pipeline needs steps >= 1")
        self.steps = steps
        rng = np.random.default_rng(seed)
        self._latents = rng.standard_normal((steps, channels, height, width))
        self.negative_prompts: list[str] = []

    def step(self, step: int, negative_prompt: str) -> np.ndarray:
        self.negative_prompts.append(negative_prompt)
        return self._latents[step - 1]


def make_pipeline(spec: dict):
    """Build a pipeline from its config mapping, e.g.
    {"kind": "scripted", "steps": 6, "channels": 4, "seed": 7}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "scripted":
        try:
            return ScriptedPipeline(**spec)
        except TypeError as e:
            raise ConfigError(f"bad scripted pipeline config: {e}") from e
    raise ConfigError(f"unknown pipeline kind {kind!r}")
