"""Composite reward stack for grouped geolocation candidates.

Four signals per candidate:

* spatial: exp(-distance/tau) between the geocoded prediction and the truth
  point, 1.0 at zero distance, 0.0 when the prediction never resolved.
* semantic: per-level embedded-text cosine between predicted and true
  address, thresholded at the country and region levels and hierarchically
  gated so a wrong country earns nothing below it.
* consistency: exact-match credit for the conclusions a separate extractor
  pulls out of the reasoning text alone, each level scaled by a sigmoid
  length penalty that is min-max normalized within the sampled group.
* directly-judge: the strict text-equality baseline, kept around purely for
  comparison runs.

The composite is a fixed-weight sum of the first three. All functions are
pure; `score_group` is the only entry point that needs the whole group at
once (the length penalty reads every member's reasoning lengths).
"""

from __future__ import annotations

import math
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import regex

from .embed import EmbeddingProvider, cosine_similarity
from .geo import GeoPoint, haversine_distance

if TYPE_CHECKING:
    from .extract import ConclusionExtractor

_WS = re.compile(r"\s+")

LEVEL_NAMES = ("country", "region", "precise")

_GRAPHEME = regex.compile(r"\X")


def normalize_place(text: str) -> str:
    """NFC + case-fold + trim + collapse internal whitespace. This is the
    equality notion used by the consistency and directly-judge indicators."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text).casefold().strip())


def _clean_level(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


@dataclass(frozen=True)
class AddressHierarchy:
    """Three-level place description: country, region, precise. Any level
    may be empty; strings are NFC-normalized and trimmed on construction."""

    country: str = ""
    region: str = ""
    precise: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "country", _clean_level(self.country))
        object.__setattr__(self, "region", _clean_level(self.region))
        object.__setattr__(self, "precise", _clean_level(self.precise))

    def levels(self) -> tuple[str, str, str]:
        return (self.country, self.region, self.precise)


@dataclass(frozen=True)
class CandidateResponse:
    """One sampled reply: reasoning text per level plus the final answer.

    resolved_point is the geocoded location of the answer, or None when
    geocoding failed (which the spatial reward scores as 0).
    """

    reasoning: tuple[str, str, str]
    answer: AddressHierarchy
    resolved_point: Optional[GeoPoint] = None

    def __post_init__(self) -> None:
        reasoning = tuple(self.reasoning)
        if len(reasoning) != 3:
            raise ValueError(f"expected 3 reasoning levels, got {len(reasoning)}")
        object.__setattr__(self, "reasoning", reasoning)


@dataclass(frozen=True)
class RewardConfig:
    """Reward hyperparameters. The defaults are the published configuration;
    anything loaded from a config file overrides them field by field.

    delta holds the per-level similarity thresholds; the precise level has
    none, so its entry is None. lambda_pen/mu_pen shape the length-penalty
    sigmoid: at 30% of the group's max length the penalty crosses 0.5.
    """

    tau: float = 200.0
    alpha: tuple[float, float, float] = (0.1, 0.6, 0.3)
    delta: tuple[Optional[float], Optional[float], Optional[float]] = (0.7, 0.5, None)
    w: tuple[float, float, float] = (0.1, 0.6, 0.3)
    a: tuple[float, float, float] = (1.5, 1.0, 0.5)
    lambda_pen: float = 10.0
    mu_pen: float = 0.3
    length_unit: str = "grapheme"

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        for name, weights in (("alpha", self.alpha), ("w", self.w)):
            if len(weights) != 3 or any(x < 0 for x in weights):
                raise ValueError(f"{name} must be 3 non-negative weights")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError(f"{name} must sum to 1, got {sum(weights)}")
        if len(self.a) != 3 or any(x < 0 for x in self.a):
            raise ValueError("a must be 3 non-negative weights")
        if self.length_unit not in ("grapheme", "codepoint"):
            raise ValueError(f"unknown length_unit: {self.length_unit}")


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-candidate reward components and their weighted total.

    total is always recomputable as a[0]*r_spa + a[1]*r_sem + a[2]*r_con
    with the config it was built under, bit for bit.
    """

    r_spa: float
    r_sem: float
    r_con: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "r_spa": self.r_spa,
            "r_sem": self.r_sem,
            "r_con": self.r_con,
            "total": self.total,
        }


def reasoning_length(text: str, unit: str = "grapheme") -> int:
    """Length of a reasoning string in the configured unit. Graphemes are
    extended grapheme clusters, so combining sequences count once."""
    if unit == "grapheme":
        return len(_GRAPHEME.findall(text))
    if unit == "codepoint":
        return len(text)
    raise ValueError(f"unknown length unit: {unit}")


def spatial_reward(
    pred: Optional[GeoPoint], truth: GeoPoint, cfg: RewardConfig
) -> float:
    """exp(-distance/tau); 0.0 for a prediction that could not be geocoded."""
    if pred is None:
        return 0.0
    return math.exp(-haversine_distance(pred, truth) / cfg.tau)


def semantic_reward(
    pred: AddressHierarchy,
    truth: AddressHierarchy,
    provider: EmbeddingProvider,
    cfg: RewardConfig,
) -> float:
    """Hierarchical embedded-text similarity in [0, 1].

    Per level i: s_i is the cosine between the embedded predicted and true
    strings; it is zeroed when it fails that level's threshold, and a level
    only contributes while every level above it passed (a wrong country
    gates out region and precise). Empty levels embed to the zero vector
    and therefore score 0.
    """
    total = 0.0
    for pred_text, truth_text, alpha, delta in zip(
        pred.levels(), truth.levels(), cfg.alpha, cfg.delta
    ):
        s = cosine_similarity(provider.embed(pred_text), provider.embed(truth_text))
        s_hat = s if (delta is None or s > delta) else 0.0
        total += alpha * s_hat
        if s_hat <= 0.0:
            break
    return max(total, 0.0)


def length_penalty(
    lengths: Sequence[int],
    group_lengths: Sequence[Sequence[int]],
    cfg: RewardConfig,
) -> tuple[float, ...]:
    """Per-level sigmoid penalties for one candidate.

    lengths holds the candidate's per-level reasoning lengths;
    group_lengths[i] holds level i's lengths across the whole group
    (including this candidate). Each length is min-max normalized within
    its level and pushed through 1/(1 + exp(-lambda*(lhat - mu))). A
    degenerate level (max == min) normalizes to 1 when the texts are
    nonempty and 0 when the whole group wrote nothing.
    """
    out = []
    for length, group in zip(lengths, group_lengths):
        if not group:
            raise ValueError("group_lengths must be nonempty per level")
        lo, hi = min(group), max(group)
        if hi == lo:
            lhat = 1.0 if length > 0 else 0.0
        else:
            lhat = (length - lo) / (hi - lo)
        out.append(1.0 / (1.0 + math.exp(-cfg.lambda_pen * (lhat - cfg.mu_pen))))
    return tuple(out)


def consistency_reward(
    extracted: AddressHierarchy,
    truth: AddressHierarchy,
    penalties: Sequence[float],
    cfg: RewardConfig,
) -> float:
    """Weighted, length-penalized exact-match credit for the conclusions
    extracted from reasoning text alone.

    The caller must obtain `extracted` from a ConclusionExtractor, which by
    construction never sees the candidate's final answer.
    """
    total = 0.0
    for ext, tru, weight, penalty in zip(
        extracted.levels(), truth.levels(), cfg.w, penalties
    ):
        if normalize_place(ext) == normalize_place(tru):
            total += weight * penalty
    return total


def directly_judge_reward(
    pred: AddressHierarchy, truth: AddressHierarchy, cfg: RewardConfig
) -> float:
    """Strict text-equality baseline: weighted sum of per-level exact
    matches after normalization. No partial credit of any kind."""
    total = 0.0
    for pred_text, truth_text, weight in zip(pred.levels(), truth.levels(), cfg.w):
        if normalize_place(pred_text) == normalize_place(truth_text):
            total += weight
    return total


def composite_reward(
    spa: float, sem: float, con: float, cfg: RewardConfig
) -> RewardBreakdown:
    """Weighted composite of the three components (default weights
    1.5/1.0/0.5). Components must already be in [0, 1]."""
    for name, value in (("spatial", spa), ("semantic", sem), ("consistency", con)):
        if not -1e-9 <= value <= 1.0 + 1e-9:
            raise ValueError(f"{name} component outside [0, 1]: {value}")
    total = cfg.a[0] * spa + cfg.a[1] * sem + cfg.a[2] * con
    return RewardBreakdown(r_spa=spa, r_sem=sem, r_con=con, total=total)


@dataclass
class GroupScore:
    """score_group output for one candidate."""

    breakdown: RewardBreakdown
    penalties: tuple[float, ...] = field(default_factory=tuple)


def score_group(
    candidates: Sequence[CandidateResponse],
    truth_point: GeoPoint,
    truth_address: AddressHierarchy,
    provider: EmbeddingProvider,
    extractor: "ConclusionExtractor",
    cfg: RewardConfig,
    jobs: int = 1,
) -> list[GroupScore]:
    """Score one GRPO group end to end.

    Reasoning lengths are gathered for the whole group first (the length
    penalty is group-relative), then candidates are scored independently,
    optionally across a thread pool. Results come back in input order.
    """
    lengths = [
        [reasoning_length(text, cfg.length_unit) for text in c.reasoning]
        for c in candidates
    ]
    group_levels = [[row[i] for row in lengths] for i in range(3)]

    def score_one(index: int) -> GroupScore:
        candidate = candidates[index]
        penalties = length_penalty(lengths[index], group_levels, cfg)
        spa = spatial_reward(candidate.resolved_point, truth_point, cfg)
        sem = semantic_reward(candidate.answer, truth_address, provider, cfg)
        extracted = extractor.extract(candidate.reasoning)
        con = consistency_reward(extracted, truth_address, penalties, cfg)
        return GroupScore(composite_reward(spa, sem, con, cfg), penalties)

    indices = range(len(candidates))
    if jobs > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(score_one, indices))
    return [score_one(i) for i in indices]
