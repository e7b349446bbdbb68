"""Analytic Gaussian-mixture sandbox: closed-form conditional velocity fields,
a mock concept classifier over clean-sample estimates, and anchor embeddings.

Under x_t = (1-t) x0 + t eps, a mixture component N(mu, Sigma) has the exact
time-t marginal N((1-t) mu, (1-t)^2 Sigma + t^2 I), so posteriors and the
probability-flow velocity are available in closed form.

Conditions are sets of component indices; ``None`` is the null condition
(the full, unconditional mixture).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import (
    DegenerateAnchor,
    DegenerateWeights,
    DomainError,
    UnknownCategory,
)

Condition = Optional[frozenset[int]]

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Component:
    label: str
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))
        if self.weight <= 0:
            raise DomainError(f"component {self.label!r}: weight must be > 0")
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise DomainError(f"component {self.label!r}: cov shape mismatch")
        if not np.allclose(self.cov, self.cov.T):
            raise DomainError(f"component {self.label!r}: cov must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() <= 0:
            raise DomainError(f"component {self.label!r}: cov must be positive-definite")


@dataclass(frozen=True)
class MixtureWorld:
    dimension: int
    components: tuple[Component, ...]
    taxonomy: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        labels = [c.label for c in self.components]
        if len(set(l.casefold() for l in labels)) != len(labels):
            raise DomainError("component labels must be unique")
        for c in self.components:
            if c.mean.size != self.dimension:
                raise DomainError(f"component {c.label!r}: wrong dimension")
        for cat, members in self.taxonomy.items():
            for m in members:
                if m not in labels:
                    raise UnknownCategory(f"taxonomy {cat!r} names unknown label {m!r}")

    # stacked views used by the math below
    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def covs(self) -> np.ndarray:
        return np.stack([c.cov for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def index_of(self, label: str) -> int:
        needle = label.casefold()
        for i, c in enumerate(self.components):
            if c.label.casefold() == needle:
                return i
        raise UnknownCategory(f"no component labeled {label!r}")

    def category_indices(self, category: str) -> frozenset[int]:
        if category not in self.taxonomy:
            raise UnknownCategory(f"no category {category!r}")
        return frozenset(self.index_of(l) for l in self.taxonomy[category])

    @classmethod
    def from_file(cls, path: str | Path) -> "MixtureWorld":
        with open(path) as f:
            doc = yaml.safe_load(f)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "MixtureWorld":
        dim = int(doc["dimension"])
        comps = []
        for c in doc["components"]:
            cov = c["cov"]
            if np.isscalar(cov):
                cov = float(cov) * np.eye(dim)
            comps.append(Component(c["label"], float(c["weight"]), c["mean"], cov))
        taxonomy = {k: tuple(v) for k, v in doc.get("taxonomy", {}).items()}
        return cls(dim, tuple(comps), taxonomy)


def _allowed(world: MixtureWorld, cond: Condition) -> np.ndarray:
    if cond is None:
        return np.arange(len(world.components))
    if not cond:
        raise DomainError("condition set must be non-empty")
    idx = np.array(sorted(cond))
    if idx.min() < 0 or idx.max() >= len(world.components):
        raise DomainError("condition indexes nonexistent components")
    return idx


def marginal_params(component: Component, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Time-t marginal of one component: ((1-t) mu, (1-t)^2 Sigma + t^2 I)."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must be in [0, 1], got {t}")
    d = component.mean.size
    return (1.0 - t) * component.mean, (1.0 - t) ** 2 * component.cov + t**2 * np.eye(d)


def _component_stats(
    world: MixtureWorld, x: np.ndarray, t: float, idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Log marginal densities (weighted) and per-component posterior x0 means.

    ``x`` may carry leading batch dimensions: shape (..., d) yields logp of
    shape (..., K) and posterior means of shape (..., K, d).
    """
    x = np.asarray(x, dtype=float)
    d = world.dimension
    mu = world.means[idx]  # (K, d)
    sig = world.covs[idx]  # (K, d, d)
    s = (1.0 - t) ** 2 * sig + t**2 * np.eye(d)  # (K, d, d)
    diff = x[..., None, :] - (1.0 - t) * mu  # (..., K, d)
    sol = np.linalg.solve(s, diff[..., None])[..., 0]  # S^-1 diff
    maha = np.einsum("...kd,...kd->...k", diff, sol)
    _, logdet = np.linalg.slogdet(s)
    logp = np.log(world.weights[idx]) - 0.5 * (maha + logdet + d * _LOG2PI)
    post_means = mu + (1.0 - t) * np.einsum("kde,...ke->...kd", sig, sol)
    return logp, post_means


def responsibilities(
    world: MixtureWorld, x: np.ndarray, t: float, cond: Condition = None,
    return_flag: bool = False,
):
    """Posterior component probabilities at time t, restricted to ``cond``.

    Computed in log space. If every density underflows to -inf the result is
    uniform over the allowed set; ``return_flag=True`` additionally returns
    whether that happened.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must be in [0, 1], got {t}")
    idx = _allowed(world, cond)
    logp, _ = _component_stats(world, x, t, idx)
    gamma, degenerate = _normalize_logp(logp, len(idx))
    return (gamma, degenerate) if return_flag else gamma


def _normalize_logp(logp: np.ndarray, k: int) -> tuple[np.ndarray, bool]:
    """Log-space softmax over the trailing component axis; rows where every
    density underflows to -inf fall back to the uniform distribution."""
    finite = np.any(np.isfinite(logp), axis=-1, keepdims=True)
    safe = np.where(finite, logp, 0.0)
    p = np.exp(safe - safe.max(axis=-1, keepdims=True))
    gamma = p / p.sum(axis=-1, keepdims=True)
    gamma = np.where(finite, gamma, 1.0 / k)
    return gamma, bool(np.any(~finite))


def posterior_x0(
    world: MixtureWorld, x: np.ndarray, t: float, cond: Condition = None
) -> np.ndarray:
    """E[x0 | x_t = x] for the condition-restricted mixture."""
    if not 0.0 <= t < 1.0 + 1e-12:
        raise DomainError(f"t must be in [0, 1], got {t}")
    idx = _allowed(world, cond)
    logp, post_means = _component_stats(world, x, t, idx)
    gamma, _ = _normalize_logp(logp, len(idx))
    return np.einsum("...k,...kd->...d", gamma, post_means)


def velocity(
    world: MixtureWorld,
    x: np.ndarray,
    t: float,
    cond: Condition = None,
    t_floor: float = 1e-3,
) -> np.ndarray:
    """Conditional probability-flow velocity (x - E[x0 | x_t]) / t."""
    if t < t_floor:
        raise DomainError(f"t {t} below floor {t_floor}")
    if t > 1.0:
        raise DomainError(f"t must be <= 1, got {t}")
    return (np.asarray(x, dtype=float) - posterior_x0(world, x, t, cond)) / t


def mc_posterior_oracle(
    world: MixtureWorld,
    x: np.ndarray,
    t: float,
    cond: Condition = None,
    n: int = 100_000,
    seed: int = 0,
) -> np.ndarray:
    """Brute-force importance estimate of E[x0 | x_t = x].

    Draws x0 from the conditioned prior and weights by the exact transition
    density N(x; (1-t) x0, t^2 I). Independent of the closed-form path.
    """
    if n < 10_000:
        raise DomainError("oracle needs n >= 10^4")
    if not 0.0 < t <= 1.0:
        raise DomainError(f"t must be in (0, 1], got {t}")
    x = np.asarray(x, dtype=float)
    idx = _allowed(world, cond)
    rng = np.random.default_rng(seed)
    w = world.weights[idx]
    w = w / w.sum()
    ks = rng.choice(len(idx), size=n, p=w)
    x0 = np.empty((n, world.dimension))
    for j, k in enumerate(idx):
        mask = ks == j
        m = int(mask.sum())
        if m:
            x0[mask] = rng.multivariate_normal(
                world.components[k].mean, world.components[k].cov, size=m
            )
    logw = -np.sum((x - (1.0 - t) * x0) ** 2, axis=1) / (2.0 * t**2)
    logw -= logw.max()
    wts = np.exp(logw)
    ess = wts.sum() ** 2 / np.sum(wts**2)
    if ess < 100:
        raise DegenerateWeights(f"effective sample size {ess:.1f} < 100")
    return (wts[:, None] * x0).sum(axis=0) / wts.sum()


def mock_vlm(
    x0_hat: np.ndarray,
    question: str,
    world: MixtureWorld,
    category: str | None = None,
    threshold: float = 3.0,
) -> str:
    """Toy concept classifier: most likely component label within the positive
    category, or "unknown" when x0_hat is farther than ``threshold`` (in
    Mahalanobis distance) from every component. Ties break to lowest index.
    """
    if question != "subcategory":
        raise DomainError(f"unsupported question {question!r}")
    x0_hat = np.asarray(x0_hat, dtype=float)
    idx = (
        np.array(sorted(world.category_indices(category)))
        if category is not None
        else np.arange(len(world.components))
    )
    mu = world.means[idx]
    sig = world.covs[idx]
    diff = x0_hat - mu
    sol = np.linalg.solve(sig, diff[..., None])[..., 0]
    maha2 = np.einsum("kd,kd->k", diff, sol)
    if np.sqrt(maha2.min()) > threshold:
        return "unknown"
    _, logdet = np.linalg.slogdet(sig)
    score = np.log(world.weights[idx]) - 0.5 * (maha2 + logdet)
    return world.components[idx[int(np.argmax(score))]].label


def condition_from_prompt(
    category: str | None, negative_text: str, world: MixtureWorld
) -> tuple[Condition, Condition]:
    """Map a positive category and a rendered negative prompt to conditions.

    Tokens that match no component label are ignored; an empty or fully
    unmatched negative yields the null condition (plain CFG).
    ``category=None`` means unconditional positive sampling.
    """
    cond_pos: Condition = (
        None if category is None else world.category_indices(category)
    )
    tokens = {s.strip().casefold() for s in negative_text.split(",") if s.strip()}
    matched = frozenset(
        i for i, c in enumerate(world.components) if c.label.casefold() in tokens
    )
    cond_neg: Condition = matched if matched else None
    return cond_pos, cond_neg


def anchor_embedding(name: str, world: MixtureWorld) -> np.ndarray:
    """Unit anchor direction: a label maps to its normalized mean, a category
    to the normalized average of its member means."""
    if name in world.taxonomy:
        members = [world.components[i].mean for i in sorted(world.category_indices(name))]
        vec = np.mean(members, axis=0)
    else:
        vec = world.components[world.index_of(name)].mean
    norm = np.linalg.norm(vec)
    if norm < 1e-9:
        raise DegenerateAnchor(f"anchor {name!r} has near-zero norm")
    return vec / norm


def forward_sample(
    world: MixtureWorld, n: int, seed: int = 0, cond: Condition = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (x0, component index) pairs from the conditioned generative model."""
    idx = _allowed(world, cond)
    rng = np.random.default_rng(seed)
    w = world.weights[idx]
    w = w / w.sum()
    ks = rng.choice(len(idx), size=n, p=w)
    x0 = np.empty((n, world.dimension))
    for j, k in enumerate(idx):
        mask = ks == j
        m = int(mask.sum())
        if m:
            x0[mask] = rng.multivariate_normal(
                world.components[k].mean, world.components[k].cov, size=m
            )
    return x0, idx[ks]
