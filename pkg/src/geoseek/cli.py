"""geoseek command line: reward scoring, toy GRPO simulation, sampling-plan
construction, geocode cache management, and benchmark evaluation.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 degraded run
(results were produced but an external dependency was missing or failing,
e.g. unresolvable predictions with no geocoding available).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as config_mod
from . import evaluate as eval_mod
from . import grpo, sampling
from .extract import PatternExtractor
from .embed import NgramEmbedder
from .geo import GeoPoint
from .geocode import GeocodeCache, GeocodeClient, TransportError
from .rewards import AddressHierarchy, CandidateResponse, RewardConfig, score_group

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGRADED = 3


def _load_effective_config(path):
    """Config from file, or the built-in defaults announced on stderr so a
    bare invocation is auditable."""
    if path:
        return config_mod.load_config(path)
    reward, params = RewardConfig(), config_mod.GrpoParams()
    print("no config file given; " + config_mod.defaults_banner(reward, params),
          file=sys.stderr)
    return reward, params


def _build_resolver(cache_path, fixtures):
    """Geocode client for optional resolution; None when no transport can
    be configured (missing key and no fixtures)."""
    if not cache_path and not fixtures:
        if not os.environ.get("GEOSEEK_GEOCODE_KEY"):
            return None
    try:
        return GeocodeClient.from_env(cache_path=cache_path, fixtures=fixtures)
    except TransportError:
        if cache_path:
            # Cache-only client: hits resolve, misses degrade.
            def no_transport(query):
                raise TransportError("no transport configured", code="config",
                                     retryable=False)

            return GeocodeClient(no_transport, cache=GeocodeCache(cache_path))
        return None


def load_candidates_jsonl(path):
    """Candidate schema per line: {id, reasoning: [c, r, p], country,
    region, precise, lat?, lon?}. Returns groups keyed by id in first-seen
    order; candidates sharing an id form one GRPO group."""
    groups: dict[str, list[CandidateResponse]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                reasoning = row.get("reasoning") or ["", "", ""]
                point = None
                if row.get("lat") is not None and row.get("lon") is not None:
                    point = GeoPoint(float(row["lat"]), float(row["lon"]))
                candidate = CandidateResponse(
                    reasoning=tuple(str(r) for r in reasoning),
                    answer=AddressHierarchy(
                        country=row.get("country", ""),
                        region=row.get("region", ""),
                        precise=row.get("precise", ""),
                    ),
                    resolved_point=point,
                )
                groups.setdefault(str(row["id"]), []).append(candidate)
            except (KeyError, TypeError, ValueError) as exc:
                raise eval_mod.DataError(f"{path}:{lineno}: bad candidate: {exc}") from exc
    return groups


def _cmd_reward(args) -> int:
    reward_cfg, _ = _load_effective_config(args.config)
    truths = {t.id: t for t in eval_mod.load_truths_jsonl(args.truth)}
    groups = load_candidates_jsonl(args.candidates)
    resolver = _build_resolver(args.cache, args.fixtures)
    provider = NgramEmbedder(dimension=args.embed_dim)
    extractor = PatternExtractor()
    degraded = False
    for group_id, candidates in groups.items():
        truth = truths.get(group_id)
        if truth is None:
            raise eval_mod.DataError(f"candidate id has no matching truth: {group_id}")
        resolved = []
        for candidate in candidates:
            point = candidate.resolved_point
            if point is None:
                query = ", ".join(x for x in candidate.answer.levels() if x)
                if resolver is not None and query:
                    point = resolver.forward(query)
                if point is None:
                    degraded = True
            resolved.append(
                CandidateResponse(candidate.reasoning, candidate.answer, point)
            )
        scores = score_group(
            resolved, truth.point, truth.address, provider, extractor,
            reward_cfg, jobs=args.jobs,
        )
        for score in scores:
            payload = {"id": group_id, **score.breakdown.as_dict()}
            print(json.dumps(payload, sort_keys=True))
    return EXIT_DEGRADED if degraded else EXIT_OK


def _cmd_simulate(args) -> int:
    reward_cfg, params = _load_effective_config(args.config)
    cells, truth = grpo.make_toy_world(num_cells=args.cells, seed=args.seed)
    policy = grpo.ToyPolicy.uniform(cells, temperature=params.temperature)
    trace = grpo.simulate_training(
        policy,
        truth,
        reward_cfg,
        steps=args.steps,
        kl_beta=params.kl_beta,
        group_size=params.group_size,
        seed=args.seed,
        jobs=args.jobs,
    )
    if args.json:
        summary = {
            "steps": args.steps,
            "cells": args.cells,
            "seed": args.seed,
            "final_mean_total": trace.mean_total[-1],
            "argmax_cell": int(policy.logits.argmax()),
            "truth_cell": int(truth.id.split("-")[1]),
        }
        print(json.dumps(summary, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            trace.write_csv(fh)
    elif not args.json:
        trace.write_csv(sys.stdout)
    return EXIT_OK


def _cmd_sample(args) -> int:
    stats = sampling.load_country_stats_csv(args.stats)
    tagged = sampling.load_grid_csv(args.grid)
    boundaries = (
        sampling.load_boundaries_geojson(args.boundaries) if args.boundaries else None
    )
    cells_by_country = sampling.assign_cells_to_countries(tagged, boundaries)
    plan = sampling.build_plan(stats, cells_by_country, args.total)
    draws = sampling.draw_plan(plan, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for code, cell in draws:
                centroid = cell.centroid()
                fh.write(
                    json.dumps(
                        {
                            "country": code,
                            "lat_index": cell.lat_index,
                            "lon_index": cell.lon_index,
                            "lat": centroid.lat,
                            "lon": centroid.lon,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    if args.json:
        print(json.dumps({"per_country": plan.per_country, "draws": len(draws)},
                         sort_keys=True))
    else:
        for code in sorted(plan.per_country):
            print(f"{code} {plan.per_country[code]}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    truths = eval_mod.load_truths_jsonl(args.truth)
    preds = eval_mod.load_predictions_jsonl(args.pred)
    needs_resolution = any(p.point is None for p in preds)
    resolver = (
        _build_resolver(args.cache, args.fixtures) if needs_resolution else None
    )
    report = eval_mod.evaluate(preds, truths, resolver=resolver, jobs=args.jobs)
    fmt = "json" if args.json else args.out
    if fmt == "json":
        sys.stdout.write(eval_mod.render_json(report))
    else:
        sys.stdout.write(eval_mod.render_table(report))
    return EXIT_DEGRADED if report.unresolved > 0 else EXIT_OK


def _cmd_geocode_cache(args) -> int:
    if args.action == "stats":
        cache = GeocodeCache(args.cache)
        payload = {"path": str(args.cache), "entries": len(cache)}
        print(json.dumps(payload, sort_keys=True) if args.json
              else f"{payload['entries']} entries in {payload['path']}")
        return EXIT_OK
    # warm: one query per line; "lat,lon" lines reverse-geocode, anything
    # else forward-geocodes.
    client = _build_resolver(args.cache, args.fixtures)
    if client is None:
        print("no geocoding transport configured", file=sys.stderr)
        return EXIT_DEGRADED
    warmed = failed = 0
    for line in Path(args.queries).read_text("utf-8").splitlines():
        query = line.strip()
        if not query:
            continue
        parts = query.split(",")
        result = None
        if len(parts) == 2:
            try:
                result = client.reverse(GeoPoint(float(parts[0]), float(parts[1])))
            except ValueError:
                result = client.forward(query)
        else:
            result = client.forward(query)
        if result is None:
            failed += 1
        else:
            warmed += 1
    print(json.dumps({"warmed": warmed, "failed": failed}, sort_keys=True)
          if args.json else f"warmed {warmed}, failed {failed}")
    return EXIT_DEGRADED if sum(client.degraded.values()) else EXIT_OK


def _cmd_compare(args) -> int:
    report_a = eval_mod.report_from_json(Path(args.a).read_text("utf-8"))
    report_b = eval_mod.report_from_json(Path(args.b).read_text("utf-8"))
    delta = eval_mod.compare_reports(report_a, report_b)
    if args.json:
        print(json.dumps(delta, sort_keys=True))
    else:
        sys.stdout.write(eval_mod.render_compare_table(delta))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoseek",
        description="Geolocation reward, simulation, sampling, and evaluation toolkit.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, jobs=False, seed=False, cfg=False):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if jobs:
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                           help="worker threads (default: cores)")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="deterministic seed")
        if cfg:
            p.add_argument("--config", help="TOML/JSON hyperparameter file")

    p = sub.add_parser("reward", help="score grouped candidates against truths")
    p.add_argument("--candidates", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--cache", help="geocode cache file")
    p.add_argument("--fixtures", help="geocode fixture directory")
    p.add_argument("--embed-dim", type=int, default=256)
    add_common(p, jobs=True, cfg=True)
    p.set_defaults(func=_cmd_reward)

    p = sub.add_parser("simulate", help="run the toy GRPO training loop")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--out", help="trace CSV path (default: stdout)")
    add_common(p, jobs=True, seed=True, cfg=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sample", help="build and draw a sampling plan")
    p.add_argument("--stats", required=True, help="country stats CSV")
    p.add_argument("--grid", required=True, help="gridded population CSV")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--boundaries", help="country boundary GeoJSON")
    p.add_argument("--out", help="draws JSONL path")
    add_common(p, seed=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="evaluate predictions against truths")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--cache", help="geocode cache file")
    p.add_argument("--fixtures", help="geocode fixture directory")
    p.add_argument("--out", choices=("json", "table"), default="table")
    add_common(p, jobs=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("geocode-cache", help="manage the geocode cache")
    p.add_argument("action", choices=("warm", "stats"))
    p.add_argument("--cache", required=True)
    p.add_argument("--queries", help="query file for warm, one per line")
    p.add_argument("--fixtures", help="geocode fixture directory")
    add_common(p)
    p.set_defaults(func=_cmd_geocode_cache)

    p = sub.add_parser("compare", help="diff two saved eval reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    add_common(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap per our contract, but
        # keep --help's clean zero.
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "geocode-cache" and args.action == "warm" and not args.queries:
        print("geocode-cache warm requires --queries", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (eval_mod.DataError, config_mod.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
