"""Evaluation harness: GeoScore and threshold accuracies over prediction files.

Reads truth/prediction record pairs, scores each prediction's distance to
ground truth, and aggregates band accuracies (City 25 km, Region 200 km,
Country 750 km, Continent 2500 km, nested) plus mean GeoScore, with strata
by locatability band and geographic-element category. Aggregation always
walks records in sorted-id order, so output is independent of input order
and of how record scoring was parallelized.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geo import (
    BAND_ORDER,
    BAND_THRESHOLDS_KM,
    GeoPoint,
    geoscore,
    haversine_distance,
)
from .rewards import AddressHierarchy

LOCATABILITY_BANDS = (("0-3", 0, 3), ("4-6", 4, 6), ("7-10", 7, 10))


class DataError(ValueError):
    """Dataset-shape problem: duplicate, missing, or mismatched ids."""


@dataclass(frozen=True)
class LocationRecord:
    """Ground truth for one item. locatability, when present, is the 0-10
    ease-of-localization score; elements is the set of scene-category tags."""

    id: str
    point: GeoPoint
    address: AddressHierarchy
    locatability: Optional[int] = None
    elements: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("record id must be nonempty")
        if self.locatability is not None and not 0 <= self.locatability <= 10:
            raise DataError(f"locatability out of range 0-10: {self.locatability}")
        object.__setattr__(self, "elements", frozenset(self.elements))


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    address: AddressHierarchy
    point: Optional[GeoPoint] = None


@dataclass
class EvalReport:
    """Aggregate metrics. accuracy maps band name to a percentage of all
    records; geoscore_mean is over all records with unresolved predictions
    scored 0. Stratum sub-reports share the shape but carry no strata."""

    n: int
    accuracy: dict[str, float]
    geoscore_mean: float
    unresolved: int = 0
    ids_digest: str = ""
    strata: dict[str, dict[str, "EvalReport"]] = field(default_factory=dict)


def _ids_digest(ids: Sequence[str]) -> str:
    joined = "\n".join(sorted(ids)).encode("utf-8")
    return hashlib.sha256(joined).hexdigest()


def _aggregate(scored: list[tuple[str, Optional[float], float]]) -> EvalReport:
    n = len(scored)
    acc = {}
    for band in BAND_ORDER:
        threshold = BAND_THRESHOLDS_KM[band]
        hits = sum(1 for _, d, _ in scored if d is not None and d <= threshold)
        acc[band.value] = 100.0 * hits / n if n else 0.0
    mean_score = sum(s for _, _, s in scored) / n if n else 0.0
    unresolved = sum(1 for _, d, _ in scored if d is None)
    return EvalReport(
        n=n,
        accuracy=acc,
        geoscore_mean=mean_score,
        unresolved=unresolved,
        ids_digest=_ids_digest([rid for rid, _, _ in scored]),
    )


def evaluate(
    preds: Sequence[PredictionRecord],
    truths: Sequence[LocationRecord],
    resolver=None,
    d_max: float = 18050.0,
    jobs: int = 1,
) -> EvalReport:
    """Score predictions against truths and build the full report.

    Every truth id must be predicted exactly once and every prediction must
    reference a known truth; anything else is a dataset mismatch and raises
    DataError. Predictions without coordinates are forward-geocoded through
    `resolver` when given; a prediction that still has no point counts as a
    Miss with GeoScore 0 rather than being dropped.
    """
    truth_by_id: dict[str, LocationRecord] = {}
    for truth in truths:
        if truth.id in truth_by_id:
            raise DataError(f"duplicate truth id: {truth.id}")
        truth_by_id[truth.id] = truth
    seen = set()
    for pred in preds:
        if pred.id in seen:
            raise DataError(f"duplicate prediction id: {pred.id}")
        if pred.id not in truth_by_id:
            raise DataError(f"prediction id has no matching truth: {pred.id}")
        seen.add(pred.id)
    missing = set(truth_by_id) - seen
    if missing:
        raise DataError(f"truths without predictions: {sorted(missing)[:5]}")

    def score(pred: PredictionRecord) -> tuple[str, Optional[float], float]:
        truth = truth_by_id[pred.id]
        point = pred.point
        if point is None and resolver is not None:
            query = ", ".join(level for level in pred.address.levels() if level)
            if query:
                point = resolver.forward(query)
        if point is None:
            return (pred.id, None, 0.0)
        d = haversine_distance(point, truth.point)
        return (pred.id, d, geoscore(d, d_max))

    ordered = sorted(preds, key=lambda p: p.id)
    if jobs > 1 and len(ordered) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(score, ordered))
    else:
        scored = [score(p) for p in ordered]

    report = _aggregate(scored)
    scored_by_id = {rid: (rid, d, s) for rid, d, s in scored}

    locatability_strata: dict[str, EvalReport] = {}
    for label, lo, hi in LOCATABILITY_BANDS:
        members = [
            scored_by_id[t.id]
            for t in truths
            if t.locatability is not None and lo <= t.locatability <= hi
        ]
        if members:
            locatability_strata[label] = _aggregate(sorted(members))
    element_strata: dict[str, EvalReport] = {}
    all_tags = sorted({tag for t in truths for tag in t.elements})
    for tag in all_tags:
        members = [scored_by_id[t.id] for t in truths if tag in t.elements]
        if members:
            element_strata[tag] = _aggregate(sorted(members))
    report.strata = {"locatability": locatability_strata, "elements": element_strata}
    return report


# --- rendering and comparison ----------------------------------------------

def _report_payload(report: EvalReport, with_strata: bool = True) -> dict:
    payload = {
        "n": report.n,
        "accuracy": {k: round(v, 2) for k, v in report.accuracy.items()},
        "geoscore_mean": round(report.geoscore_mean, 2),
        "unresolved": report.unresolved,
        "ids_digest": report.ids_digest,
    }
    if with_strata:
        payload["strata"] = {
            group: {
                label: _report_payload(sub, with_strata=False)
                for label, sub in sorted(subs.items())
            }
            for group, subs in sorted(report.strata.items())
        }
    return payload


def render_json(report: EvalReport) -> str:
    """Stable machine-readable rendering: sorted keys, percentages to two
    decimals, GeoScore to two decimals, trailing newline."""
    return json.dumps(_report_payload(report), sort_keys=True, indent=2) + "\n"


def render_table(report: EvalReport) -> str:
    lines = [
        f"records: {report.n}    unresolved: {report.unresolved}",
        f"{'band':<10} {'accuracy %':>10}",
    ]
    for band in BAND_ORDER:
        lines.append(f"{band.value:<10} {report.accuracy[band.value]:>10.2f}")
    lines.append(f"{'geoscore':<10} {report.geoscore_mean:>10.2f}")
    for group, subs in sorted(report.strata.items()):
        if not subs:
            continue
        lines.append("")
        lines.append(f"by {group}:")
        header = f"  {'stratum':<16} {'n':>5} " + " ".join(
            f"{b.value:>9}" for b in BAND_ORDER
        ) + f" {'geoscore':>9}"
        lines.append(header)
        for label, sub in sorted(subs.items()):
            row = f"  {label:<16} {sub.n:>5} " + " ".join(
                f"{sub.accuracy[b.value]:>9.2f}" for b in BAND_ORDER
            ) + f" {sub.geoscore_mean:>9.2f}"
            lines.append(row)
    return "\n".join(lines) + "\n"


def report_from_json(text: str) -> EvalReport:
    """Load a report previously emitted by render_json."""
    data = json.loads(text)

    def build(payload: dict) -> EvalReport:
        return EvalReport(
            n=payload["n"],
            accuracy=dict(payload["accuracy"]),
            geoscore_mean=payload["geoscore_mean"],
            unresolved=payload.get("unresolved", 0),
            ids_digest=payload.get("ids_digest", ""),
            strata={
                group: {label: build(sub) for label, sub in subs.items()}
                for group, subs in payload.get("strata", {}).items()
            },
        )

    return build(data)


def compare_reports(a: EvalReport, b: EvalReport) -> dict:
    """Per-metric differences (b minus a) for two reports over the same
    dataset. Refuses to compare reports with different record id sets."""
    if a.ids_digest != b.ids_digest:
        raise DataError("reports cover different datasets (id digests differ)")
    delta = {
        "n": a.n,
        "accuracy": {
            band.value: round(b.accuracy[band.value] - a.accuracy[band.value], 2)
            for band in BAND_ORDER
        },
        "geoscore_mean": round(b.geoscore_mean - a.geoscore_mean, 2),
        "unresolved": b.unresolved - a.unresolved,
    }
    return delta


def render_compare_table(delta: dict) -> str:
    lines = [f"records: {delta['n']}", f"{'metric':<12} {'delta':>10}"]
    for band in BAND_ORDER:
        lines.append(f"{band.value:<12} {delta['accuracy'][band.value]:>+10.2f}")
    lines.append(f"{'geoscore':<12} {delta['geoscore_mean']:>+10.2f}")
    lines.append(f"{'unresolved':<12} {delta['unresolved']:>+10d}")
    return "\n".join(lines) + "\n"


# --- JSONL I/O ---------------------------------------------------------------

def load_truths_jsonl(path) -> list[LocationRecord]:
    """Truth schema per line: {id, lat, lon, country, region, precise,
    locatability?, elements?[]}."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                records.append(
                    LocationRecord(
                        id=str(row["id"]),
                        point=GeoPoint(float(row["lat"]), float(row["lon"])),
                        address=AddressHierarchy(
                            country=row.get("country", ""),
                            region=row.get("region", ""),
                            precise=row.get("precise", ""),
                        ),
                        locatability=(
                            int(row["locatability"])
                            if row.get("locatability") is not None
                            else None
                        ),
                        elements=frozenset(row.get("elements") or ()),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad truth record: {exc}") from exc
    return records


def load_predictions_jsonl(path) -> list[PredictionRecord]:
    """Prediction schema per line: {id, country, region, precise, lat?, lon?}."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                point = None
                if row.get("lat") is not None and row.get("lon") is not None:
                    point = GeoPoint(float(row["lat"]), float(row["lon"]))
                records.append(
                    PredictionRecord(
                        id=str(row["id"]),
                        address=AddressHierarchy(
                            country=row.get("country", ""),
                            region=row.get("region", ""),
                            precise=row.get("precise", ""),
                        ),
                        point=point,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return records
