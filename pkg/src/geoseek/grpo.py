"""Group-relative policy optimization exercised on a toy discrete policy.

The update math is the usual pair: rewards are normalized into advantages
within each sampled group (population statistics, zero signal for a uniform
group), and the policy moves along the gradient of the clipped surrogate
objective, minus a KL leash to the initial policy.

The toy policy is a softmax over K grid cells. Each cell carries a centroid
and a canned candidate reply (reasoning plus address), so every step scores
its sampled group with the full reward stack and the per-component reward
curves can be traced over training. Cells are laid out as a quadtree: the
four top-level quadrants are countries and the sixteen second-level
quadrants are regions, which gives the semantic and consistency rewards the
same kind of partial credit structure the real task has.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .embed import NgramEmbedder, cosine_similarity, ngram_embed
from .evaluate import LocationRecord
from .extract import ConclusionExtractor, PatternExtractor
from .geo import GeoPoint
from .rewards import (
    AddressHierarchy,
    CandidateResponse,
    RewardBreakdown,
    RewardConfig,
    score_group,
)

DEFAULT_GROUP_SIZE = 8
DEFAULT_TEMPERATURE = 0.7
DEFAULT_KL_BETA = 0.001
DEFAULT_LEARNING_RATE = 0.1


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> np.ndarray:
    """Normalize group rewards into advantages: (R - mean) / population std.

    A group whose rewards are uniform (std <= eps) carries no learning
    signal and maps to all-zero advantages rather than amplified noise.
    """
    rs = np.asarray(rewards, dtype=np.float64)
    if rs.size == 0:
        raise ValueError("group must be nonempty")
    if not np.all(np.isfinite(rs)):
        raise ValueError("rewards must be finite")
    std = float(rs.std())
    if std <= eps:
        return np.zeros_like(rs)
    return (rs - rs.mean()) / std


def clipped_objective(
    ratios: Sequence[float], advantages: Sequence[float], eps_clip: float = 0.2
) -> float:
    """Mean over samples of min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    r = np.asarray(ratios, dtype=np.float64)
    a = np.asarray(advantages, dtype=np.float64)
    if r.shape != a.shape:
        raise ValueError(f"shape mismatch: {r.shape} vs {a.shape}")
    if r.size == 0:
        raise ValueError("need at least one sample")
    if np.any(r <= 0):
        raise ValueError("importance ratios must be positive")
    clipped = np.clip(r, 1.0 - eps_clip, 1.0 + eps_clip)
    return float(np.mean(np.minimum(r * a, clipped * a)))


@dataclass(frozen=True)
class ToyCell:
    """One discrete action: a location plus the canned reply emitted when
    the policy picks this cell."""

    point: GeoPoint
    response: CandidateResponse
    country_index: int
    region_index: int


@dataclass
class ToyPolicy:
    """Softmax policy over toy cells, logits/temperature parameterized."""

    cells: tuple[ToyCell, ...]
    logits: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (len(self.cells),):
            raise ValueError("logits must align with cells")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def uniform(
        cls, cells: Sequence[ToyCell], temperature: float = DEFAULT_TEMPERATURE
    ) -> "ToyPolicy":
        return cls(tuple(cells), np.zeros(len(cells)), temperature)

    def probs(self) -> np.ndarray:
        scaled = self.logits / self.temperature
        scaled = scaled - scaled.max()
        exp = np.exp(scaled)
        return exp / exp.sum()


@dataclass
class TrainingTrace:
    """Per-step mean reward components of the sampled group."""

    steps: list[int] = field(default_factory=list)
    mean_r_spa: list[float] = field(default_factory=list)
    mean_r_sem: list[float] = field(default_factory=list)
    mean_r_con: list[float] = field(default_factory=list)
    mean_total: list[float] = field(default_factory=list)

    def append(self, step: int, breakdowns: Sequence[RewardBreakdown]) -> None:
        self.steps.append(step)
        self.mean_r_spa.append(float(np.mean([b.r_spa for b in breakdowns])))
        self.mean_r_sem.append(float(np.mean([b.r_sem for b in breakdowns])))
        self.mean_r_con.append(float(np.mean([b.r_con for b in breakdowns])))
        self.mean_total.append(float(np.mean([b.total for b in breakdowns])))

    def write_csv(self, fileobj) -> None:
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(["step", "mean_r_spa", "mean_r_sem", "mean_r_con", "mean_total"])
        for row in zip(
            self.steps, self.mean_r_spa, self.mean_r_sem, self.mean_r_con, self.mean_total
        ):
            writer.writerow([row[0]] + [repr(x) for x in row[1:]])


def convergence_step(series: Sequence[float], frac: float = 0.9, tail: int = 10) -> int:
    """First step index at which the series reaches `frac` of its final
    value, the final value being the mean over the last `tail` steps."""
    if not series:
        raise ValueError("empty series")
    final = float(np.mean(series[-tail:]))
    target = frac * final
    for i, value in enumerate(series):
        if value >= target:
            return i
    return len(series) - 1


# --- toy world -------------------------------------------------------------

_SYLLABLES = (
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "ne",
    "po", "ra", "su", "te", "vi", "wo", "xa", "ye", "zo", "qu",
)

_FILLERS = (
    "The road surface and lane markings give a first hint.",
    "Vegetation density narrows the search considerably.",
    "Utility poles and signage fonts are distinctive here.",
    "The driving side and curb style are worth noting.",
    "Light quality and shadow angles constrain the latitude.",
    "Architecture and fencing styles stand out in the scene.",
)

# Maximum pairwise name similarity tolerated when synthesizing the world;
# comfortably below both semantic thresholds so wrong names always gate.
_NAME_SEPARATION = 0.4
_NAME_EMBED_DIM = 256


def _make_names(count: int, rng: random.Random, taken: list[np.ndarray]) -> list[str]:
    names = []
    while len(names) < count:
        name = "".join(rng.choice(_SYLLABLES) for _ in range(3)).capitalize()
        vec = ngram_embed(name, _NAME_EMBED_DIM)
        if all(cosine_similarity(vec, other) < _NAME_SEPARATION for other in taken):
            taken.append(vec)
            names.append(name)
    return names


def _reasoning_text(rng: random.Random, assertion: str) -> str:
    fillers = [rng.choice(_FILLERS) for _ in range(rng.randint(0, 3))]
    return " ".join(fillers + [assertion])


def make_toy_world(
    num_cells: int = 64, seed: int = 0, truth_index: Optional[int] = None
) -> tuple[tuple[ToyCell, ...], LocationRecord]:
    """Build a quadtree toy world and the planted truth record.

    num_cells must be a power of four (>= 16) so the quadrants nest. The
    truth is the centroid and address of one cell; that cell's reply is the
    uniquely correct answer, its region mates earn partial semantic and
    consistency credit, and spatial credit decays fast (cells sit 5 degrees
    apart, far beyond the reward temperature).
    """
    side = round(math.sqrt(num_cells))
    if side * side != num_cells or num_cells < 16 or (side & (side - 1)) != 0:
        raise ValueError(f"num_cells must be a power of 4 and >= 16, got {num_cells}")
    rng = random.Random(seed)
    taken: list[np.ndarray] = []
    country_names = _make_names(4, rng, taken)
    region_names = _make_names(16, rng, taken)
    precise_names = _make_names(num_cells, rng, taken)

    spacing = 5.0
    half = side // 2
    quarter = max(side // 4, 1)
    cells = []
    for i in range(num_cells):
        row, col = divmod(i, side)
        country_idx = (row // half) * 2 + (col // half)
        region_idx = (row // quarter) * 4 + (col // quarter)
        point = GeoPoint(
            lat=(row - (side - 1) / 2.0) * spacing,
            lon=(col - (side - 1) / 2.0) * spacing,
        )
        address = AddressHierarchy(
            country=country_names[country_idx],
            region=region_names[region_idx],
            precise=precise_names[i],
        )
        reasoning = (
            _reasoning_text(rng, f"The plates and signage indicate {address.country}."),
            _reasoning_text(rng, f"This is {address.region}."),
            _reasoning_text(rng, f"The exact spot is located in {address.precise}."),
        )
        cells.append(
            ToyCell(
                point=point,
                response=CandidateResponse(
                    reasoning=reasoning, answer=address, resolved_point=point
                ),
                country_index=country_idx,
                region_index=region_idx,
            )
        )
    if truth_index is None:
        truth_index = rng.randrange(num_cells)
    truth_cell = cells[truth_index]
    truth = LocationRecord(
        id=f"cell-{truth_index}",
        point=truth_cell.point,
        address=truth_cell.response.answer,
    )
    return tuple(cells), truth


RewardFn = Callable[[Sequence[CandidateResponse], LocationRecord], Sequence[RewardBreakdown]]


def simulate_training(
    policy: ToyPolicy,
    truth: LocationRecord,
    cfg: RewardConfig,
    steps: int,
    kl_beta: float = DEFAULT_KL_BETA,
    *,
    group_size: int = DEFAULT_GROUP_SIZE,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    eps_clip: float = 0.2,
    seed: int = 0,
    provider=None,
    extractor: Optional[ConclusionExtractor] = None,
    reward_fn: Optional[RewardFn] = None,
    jobs: int = 1,
) -> TrainingTrace:
    """Run the toy GRPO loop and return the per-step reward trace.

    Each step samples a group of actions from the current policy, scores
    them with the full reward stack (or `reward_fn` when injected), turns
    the rewards into group advantages, and ascends the clipped surrogate
    objective minus kl_beta times the KL divergence to the frozen initial
    policy. The policy's logits are updated in place.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    provider = provider or NgramEmbedder()
    extractor = extractor or PatternExtractor()
    rng = np.random.default_rng(seed)
    k = len(policy.cells)
    t = policy.temperature
    ref_probs = policy.probs()
    trace = TrainingTrace()

    for step in range(steps):
        probs = policy.probs()
        actions = rng.choice(k, size=group_size, p=probs)
        candidates = [policy.cells[a].response for a in actions]
        if reward_fn is not None:
            breakdowns = list(reward_fn(candidates, truth))
        else:
            scores = score_group(
                candidates, truth.point, truth.address, provider, extractor, cfg, jobs=jobs
            )
            breakdowns = [s.breakdown for s in scores]
        trace.append(step, breakdowns)

        rewards = np.array([b.total for b in breakdowns])
        adv = group_advantages(rewards)
        # One update per sampled batch: the sampling policy is the old
        # policy, so every importance ratio is 1 at gradient time and the
        # clip gate is open. The masked form keeps the math honest if the
        # loop is ever extended to multiple inner epochs.
        ratios = np.ones(group_size)
        grad = np.zeros(k)
        for action, advantage, ratio in zip(actions, adv, ratios):
            clip_shut = (advantage >= 0 and ratio > 1.0 + eps_clip) or (
                advantage < 0 and ratio < 1.0 - eps_clip
            )
            if clip_shut:
                continue
            direction = -probs.copy()
            direction[action] += 1.0
            grad += advantage * ratio * direction / t / group_size

        log_ratio = np.log(probs / ref_probs)
        kl = float(np.sum(probs * log_ratio))
        grad -= kl_beta * probs * (log_ratio - kl) / t

        policy.logits = policy.logits + learning_rate * grad

    return trace


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance between two distributions."""
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
