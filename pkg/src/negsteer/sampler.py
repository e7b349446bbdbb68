"""Flow-matching Euler sampler with negative-prompt classifier-free guidance.

Convention: x_t = (1-t) x0 + t eps with velocity v = eps - x0 and t running
from 1.0 down to a small positive floor, so the clean estimate
x0_hat = x_t - t * v is an exact identity.

The sampler is generic over four collaborators:
  field(x, t, cond)        -> velocity vector
  conditioner(neg_text)    -> (cond_pos, cond_neg); "" maps to the null condition
  oracle(obs, question)    -> raw answer text
  preview(x0_hat)          -> observation handed to the oracle
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DomainError, SamplingError
from .guidance import (
    Adaptive,
    ControllerMode,
    NegativeLedger,
    QuerySchedule,
    ReplayStore,
    ledger_update,
    negatives_for_step,
    normalize_answer,
    should_query,
)


@dataclass(frozen=True)
class TimeGrid:
    """Descending time nodes t_0 = 1.0 > ... > t_N = t_floor (N = total_steps)."""

    total_steps: int
    times: tuple[float, ...]

    def __post_init__(self):
        if self.total_steps < 1:
            raise DomainError("total_steps must be >= 1")
        t = np.asarray(self.times)
        if len(t) != self.total_steps + 1:
            raise DomainError("times must have total_steps + 1 nodes")
        if t[0] != 1.0:
            raise DomainError("first time node must be exactly 1.0")
        if t[-1] <= 0.0:
            raise DomainError("t_floor must be positive")
        if not np.all(np.diff(t) < 0):
            raise DomainError("times must be strictly decreasing")

    @classmethod
    def uniform(cls, total_steps: int = 28, t_floor: float = 1e-3) -> "TimeGrid":
        times = np.linspace(1.0, t_floor, total_steps + 1)
        return cls(total_steps, tuple(float(v) for v in times))

    @property
    def t_floor(self) -> float:
        return self.times[-1]


@dataclass(frozen=True)
class GuidanceConfig:
    schedule: QuerySchedule
    mode: ControllerMode = Adaptive()
    w: float = 4.5
    questions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.w < 0:
            raise DomainError("guidance scale w must be >= 0")


@dataclass(frozen=True)
class StepRecord:
    step: int
    t: float
    x_t: np.ndarray
    x0_hat: np.ndarray
    v_pos: np.ndarray
    v_neg: np.ndarray
    v_guided: np.ndarray
    answers: tuple[str, ...]
    negative_prompt: str


@dataclass(frozen=True)
class Trajectory:
    seed: int
    config: GuidanceConfig
    records: tuple[StepRecord, ...]
    final_sample: np.ndarray
    final_ledger: NegativeLedger


def predict_x0(x_t: np.ndarray, t: float, v: np.ndarray) -> np.ndarray:
    """Clean-sample estimate x0_hat = x_t - t * v."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    return x_t - t * v


def guided_velocity(v_pos: np.ndarray, v_neg: np.ndarray, w: float) -> np.ndarray:
    """v_neg + w * (v_pos - v_neg); exact at the collapse points w=0 and w=1."""
    if w == 1.0:
        return v_pos
    if w == 0.0:
        return v_neg
    return v_neg + w * (v_pos - v_neg)


def euler_step(x_t: np.ndarray, t: float, t_next: float, v: np.ndarray) -> np.ndarray:
    """Explicit Euler advance along descending time."""
    if t_next >= t:
        raise DomainError(f"t_next {t_next} must be below t {t}")
    return x_t + (t_next - t) * v


def sample(
    field: Callable[[np.ndarray, float, Any], np.ndarray],
    conditioner: Callable[[str], tuple[Any, Any]],
    oracle: Callable[[Any, str], str] | None,
    preview: Callable[[np.ndarray], Any],
    config: GuidanceConfig,
    grid: TimeGrid,
    seed: int,
    dim: int,
    store: ReplayStore | None = None,
) -> Trajectory:
    """Run the closed query-steer loop for one seed.

    Queries are issued on x0_hat of step s; the updated ledger affects the
    negative prompt from step s+1 onward. Deterministic given (seed, config,
    collaborators).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    ledger = NegativeLedger()
    current_answers: tuple[str, ...] = ()
    records: list[StepRecord] = []

    for i in range(grid.total_steps):
        t, t_next = grid.times[i], grid.times[i + 1]
        try:
            neg_text = negatives_for_step(
                config.mode, ledger, i, config.schedule, current_answers, store
            )
            cond_pos, cond_neg = conditioner(neg_text)
            v_pos = field(x, t, cond_pos)
            v_neg = field(x, t, cond_neg)
            v_guided = guided_velocity(v_pos, v_neg, config.w)
            x0_hat = x - t * v_guided
            answers: tuple[str, ...] = ()
            if oracle is not None and config.questions and should_query(config.schedule, i):
                raw = [oracle(preview(x0_hat), q) for q in config.questions]
                ledger = ledger_update(ledger, raw, i)
                answers = tuple(
                    tok for tok in (normalize_answer(r) for r in raw) if tok
                )
                current_answers = answers
        except SamplingError:
            raise
        except Exception as e:  # collaborator failure: attach step context
            raise SamplingError(i, f"{type(e).__name__}: {e}") from e
        records.append(
            StepRecord(i, t, x.copy(), x0_hat, v_pos, v_neg, v_guided, answers, neg_text)
        )
        x = euler_step(x, t, t_next, v_guided)

    return Trajectory(seed, config, tuple(records), x, ledger)


@dataclass(frozen=True)
class StepDiagnostic:
    step: int
    agreement: bool | None
    velocity_cosine: float


def step_correlation(
    trajectory: Trajectory,
    labeler: Callable[[np.ndarray], str] | None = None,
) -> list[StepDiagnostic]:
    """Per-step diagnostics: does the oracle label on x0_hat match the final
    sample's label, and how aligned are consecutive guided velocities.

    The cosine at step 0 is defined as 1.0 (no predecessor).
    """
    final_label = labeler(trajectory.final_sample) if labeler is not None else None
    out: list[StepDiagnostic] = []
    prev_v: np.ndarray | None = None
    for rec in trajectory.records:
        if labeler is not None:
            agree = labeler(rec.x0_hat) == final_label
        else:
            agree = None
        if prev_v is None:
            cos = 1.0
        else:
            denom = float(np.linalg.norm(prev_v) * np.linalg.norm(rec.v_guided))
            cos = float(np.dot(prev_v, rec.v_guided) / denom) if denom > 0 else float("nan")
        out.append(StepDiagnostic(rec.step, agree, cos))
        prev_v = rec.v_guided
    return out
