"""Group-relative advantages, RL data selection, and a toy policy simulation.

The simulator is plain REINFORCE over a categorical policy with
group-normalized advantages; it exists to demonstrate that the verifiable
rewards rank outputs and drive a policy toward the best candidate, not to
reproduce full clipped-objective GRPO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .manifest import Manifest, PredictionRecord
from .rewards import reward_total
from .seeding import derive_rng

DEFAULT_GROUP_SIZE = 8
DEFAULT_BUDGET = 20000
ZERO_SPREAD_EPS = 1e-8


class GrpoError(ValueError):
    pass


def group_advantages(rewards: Sequence[float]) -> List[float]:
    """(r - mean) / population std; all zeros when the group has no spread."""
    if len(rewards) < 2:
        raise GrpoError("a group needs at least 2 outputs")
    r = np.asarray(rewards, dtype=np.float64)
    std = float(r.std())
    if std < ZERO_SPREAD_EPS:
        return [0.0] * len(rewards)
    mean = float(r.mean())
    return [(float(x) - mean) / std for x in r]


def classify_prediction(pred: PredictionRecord) -> str:
    """format_error takes precedence over content_error; else correct."""
    if not pred.format_ok:
        return "format_error"
    if pred.wer > 0.0:
        return "content_error"
    return "correct"


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str  # random | balanced_correct_error | error_only
    budget: int = DEFAULT_BUDGET
    correct_to_error_ratio: Tuple[int, int] = (1, 5)

    def __post_init__(self):
        if self.kind not in ("random", "balanced_correct_error", "error_only"):
            raise GrpoError(f"unknown selection strategy {self.kind!r}")
        if self.budget <= 0:
            raise GrpoError("budget must be > 0")
        c, e = self.correct_to_error_ratio
        if c <= 0 or e <= 0:
            raise GrpoError("ratio components must be > 0")


def select_rl_data(preds: Manifest, strategy: SelectionStrategy, seed: int) -> List[str]:
    """Pick training example ids according to the selection strategy.

    error_only: every format-error id, then random content-error ids up to the
    budget (format errors alone must fit). balanced: correct and error ids in
    the configured ratio, rounding toward the error side, errors format-first.
    """
    rng = derive_rng(seed, "select", strategy.kind)
    ids = [p.example_id for p in preds]
    classes = {p.example_id: classify_prediction(p) for p in preds}
    fmt_ids = [i for i in ids if classes[i] == "format_error"]
    content_ids = [i for i in ids if classes[i] == "content_error"]
    correct_ids = [i for i in ids if classes[i] == "correct"]

    def sample(pool: List[str], n: int) -> List[str]:
        if n > len(pool):
            raise GrpoError(f"cannot draw {n} ids from a pool of {len(pool)}")
        idx = rng.choice(len(pool), size=n, replace=False)
        return [pool[j] for j in sorted(int(k) for k in idx)]

    if strategy.kind == "random":
        return sample(ids, strategy.budget)

    if strategy.kind == "error_only":
        if not fmt_ids and not content_ids:
            raise GrpoError("error_only selection: no error samples available")
        if len(fmt_ids) > strategy.budget:
            raise GrpoError(
                f"error_only selection: {len(fmt_ids)} format errors exceed budget {strategy.budget}"
            )
        n_content = min(strategy.budget - len(fmt_ids), len(content_ids))
        return fmt_ids + sample(content_ids, n_content)

    # balanced_correct_error
    c_ratio, e_ratio = strategy.correct_to_error_ratio
    n_error = math.ceil(strategy.budget * e_ratio / (c_ratio + e_ratio))
    n_correct = strategy.budget - n_error
    error_pool_size = len(fmt_ids) + len(content_ids)
    if n_error > error_pool_size:
        raise GrpoError(
            f"balanced selection needs {n_error} error samples, only {error_pool_size} available"
        )
    if n_correct > len(correct_ids):
        raise GrpoError(
            f"balanced selection needs {n_correct} correct samples, only {len(correct_ids)} available"
        )
    # format errors first, per their precedence in training value
    if n_error <= len(fmt_ids):
        errors = sample(fmt_ids, n_error)
    else:
        errors = fmt_ids + sample(content_ids, n_error - len(fmt_ids))
    return errors + sample(correct_ids, n_correct)


@dataclass(frozen=True)
class ToyInstance:
    instance_id: str
    reference: str
    candidates: Tuple[str, ...]
    logits: Tuple[float, ...]

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise GrpoError(f"{self.instance_id}: need at least 2 candidates")
        if len(self.logits) != len(self.candidates):
            raise GrpoError(f"{self.instance_id}: logits must match candidates")

    @classmethod
    def from_dict(cls, obj: Dict) -> "ToyInstance":
        candidates = tuple(obj["candidates"])
        logits = tuple(float(x) for x in obj.get("logits", [0.0] * len(candidates)))
        return cls(
            instance_id=str(obj["instance_id"]),
            reference=str(obj["reference"]),
            candidates=candidates,
            logits=logits,
        )


@dataclass
class TraceRow:
    step: int
    mean_reward: float
    p_best: float


@dataclass
class SimulationResult:
    trace: List[TraceRow] = field(default_factory=list)
    final_logits: Dict[str, List[float]] = field(default_factory=dict)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def simulate_grpo(
    instances: Sequence[ToyInstance],
    group_size: int = DEFAULT_GROUP_SIZE,
    lr: float = 0.05,
    steps: int = 1000,
    seed: int = 0,
) -> SimulationResult:
    """REINFORCE with group-normalized advantages over fixed candidate sets.

    Per step and instance: sample group_size candidates from the softmax
    policy, score them with the total reward, normalize within the group,
    and apply the exact softmax policy gradient to the logits.
    """
    if group_size < 2:
        raise GrpoError("group_size must be >= 2")
    rewards = [
        np.array([reward_total(c, inst.reference).r_total for c in inst.candidates])
        for inst in instances
    ]
    best_idx = [int(np.argmax(r)) for r in rewards]
    logits = [np.array(inst.logits, dtype=np.float64) for inst in instances]
    rngs = [derive_rng(seed, "grpo-sim", inst.instance_id) for inst in instances]

    result = SimulationResult()

    def record(step: int, mean_reward: float):
        p_best = float(np.mean([_softmax(lg)[b] for lg, b in zip(logits, best_idx)]))
        result.trace.append(TraceRow(step=step, mean_reward=mean_reward, p_best=p_best))

    # step 0 row: expected reward under the initial policy, no update yet
    record(0, float(np.mean([_softmax(lg) @ r for lg, r in zip(logits, rewards)])))

    for step in range(1, steps + 1):
        step_rewards = []
        for i, inst in enumerate(instances):
            probs = _softmax(logits[i])
            picks = rngs[i].choice(len(probs), size=group_size, replace=True, p=probs)
            group_r = [float(rewards[i][c]) for c in picks]
            adv = np.asarray(group_advantages(group_r))
            # sum over samples of a * (onehot - probs); collapses to a
            # weighted bincount because the advantages sum to ~0
            grad = np.bincount(picks, weights=adv, minlength=len(probs)) - adv.sum() * probs
            logits[i] += lr * grad
            if not np.all(np.isfinite(logits[i])):
                raise GrpoError(f"non-finite logits for {inst.instance_id} at step {step}")
            step_rewards.extend(group_r)
        record(step, float(np.mean(step_rewards)))

    result.final_logits = {
        inst.instance_id: [float(x) for x in lg] for inst, lg in zip(instances, logits)
    }
    return result
