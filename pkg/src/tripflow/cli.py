"""Command-line pipeline: ingest, factorize, extract-clusters, build-hypotheses, rank.

Each stage reads and writes plain text files in the configured output
directory, so every intermediate artifact is independently inspectable and
re-running any stage with identical inputs and seed reproduces its outputs
byte for byte. ``pipeline`` chains all stages; ``synth`` writes the shipped
synthetic fixture for end-to-end runs without real data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .clusters import cluster_counts, write_membership
from .config import ConfigError, PipelineConfig, load_config
from .evidence import k_sweep, write_rankings
from .geo import load_tracts
from .hypotheses import build_catalog
from .ingest import TransitionCounts, clean_trips, load_clean_trips, load_raw_trips, \
    transition_counts, write_clean_trips
from .synth import write_demo_fixture
from .tensor import build_tensor, load_factors, ntf_decompose, save_factors


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _require(cfg: PipelineConfig, *names: str) -> None:
    missing = [name for name in names if getattr(cfg, name) is None]
    if missing:
        raise ConfigError(f"missing required path(s): {', '.join(missing)} "
                          f"(set via config [paths], environment, or flags)")


def _input_file(path: Path, what: str) -> Path:
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return Path(path)


def _ensure_output_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_ingest(cfg: PipelineConfig) -> dict:
    _require(cfg, "tracts", "trips", "output_dir")
    space = load_tracts(_input_file(cfg.tracts, "tracts file"))
    records, malformed = load_raw_trips(_input_file(cfg.trips, "trips file"))
    trips, tally = clean_trips(records, space, exclude_self_loops=cfg.exclude_self_loops)
    if malformed:
        tally["malformed"] = tally.get("malformed", 0) + malformed
    out = _ensure_output_dir(cfg)
    write_clean_trips(out / "trips_clean.csv", trips)
    summary = {"accepted": len(trips), "rejected": tally,
               "input_records": len(records) + malformed}
    with open(out / "ingest_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_factorize(cfg: PipelineConfig) -> dict:
    _require(cfg, "tracts", "output_dir")
    space = load_tracts(_input_file(cfg.tracts, "tracts file"))
    out = _ensure_output_dir(cfg)
    trips = load_clean_trips(_input_file(out / "trips_clean.csv", "cleaned trips file"))
    tensor = build_tensor(trips, len(space))
    factors, trace = ntf_decompose(tensor, cfg.r, cfg.ntf_options())
    save_factors(out, factors, seed=cfg.seed, trace=trace)
    return {"r": cfg.r, "iterations": trace.iterations,
            "final_error": trace.errors[-1], "converged": trace.converged}


def run_extract_clusters(cfg: PipelineConfig) -> dict:
    _require(cfg, "tracts", "output_dir")
    space = load_tracts(_input_file(cfg.tracts, "tracts file"))
    out = _ensure_output_dir(cfg)
    trips = load_clean_trips(_input_file(out / "trips_clean.csv", "cleaned trips file"))
    _input_file(out / "factors_meta.json", "factor files")
    factors = load_factors(out)
    for stale in out.glob("cluster_*"):  # drop leftovers from runs with a larger r
        stale.unlink()
    sizes = {}
    for c in range(factors.r):
        write_membership(out / f"cluster_{c}_membership.csv", factors, c, cfg.n)
        counts = cluster_counts(trips, factors, c, cfg.n, len(space))
        np.savetxt(out / f"cluster_{c}_counts.csv", counts.counts, fmt="%d", delimiter=",")
        sizes[f"cluster_{c}"] = counts.total
    return {"clusters": sizes, "n": cfg.n}


def run_build_hypotheses(cfg: PipelineConfig) -> dict:
    _require(cfg, "tracts", "output_dir")
    space = load_tracts(_input_file(cfg.tracts, "tracts file"))
    catalog = build_catalog(space, cfg.catalog_config())
    out = _ensure_output_dir(cfg)
    with open(out / "catalog_manifest.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("hypothesis,states,nonzeros\n")
        for h in catalog:
            fh.write(f"{h.name},{h.q.shape[0]},{int(np.count_nonzero(h.q))}\n")
    return {"hypotheses": len(catalog)}


def _load_counts_file(path: Path, size: int) -> TransitionCounts:
    counts = np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2)
    if counts.shape != (size, size):
        raise ValueError(f"{path}: expected a {size}x{size} matrix, got {counts.shape}")
    return TransitionCounts(counts=counts, total=int(counts.sum()))


def run_rank(cfg: PipelineConfig) -> dict:
    _require(cfg, "tracts", "output_dir")
    space = load_tracts(_input_file(cfg.tracts, "tracts file"))
    out = _ensure_output_dir(cfg)
    trips = load_clean_trips(_input_file(out / "trips_clean.csv", "cleaned trips file"))
    catalog = build_catalog(space, cfg.catalog_config())

    count_sets: list[tuple[str, TransitionCounts]] = [
        ("overall", transition_counts(trips, len(space)))]
    cluster_files = sorted(out.glob("cluster_*_counts.csv"))
    if not cluster_files:
        raise FileNotFoundError(f"no cluster counts in {out}; run extract-clusters first")
    for path in cluster_files:
        label = path.name.removesuffix("_counts.csv")
        count_sets.append((label, _load_counts_file(path, len(space))))

    rows = []
    for label, counts in count_sets:
        for result in k_sweep(counts, catalog, cfg.k_grid):
            rows.append((label, result))
    write_rankings(out / "rankings.csv", rows)
    return {"count_sets": [label for label, _ in count_sets],
            "k_grid": list(cfg.k_grid), "hypotheses": len(catalog)}


_STAGES = (("ingest", run_ingest), ("factorize", run_factorize),
           ("extract-clusters", run_extract_clusters),
           ("build-hypotheses", run_build_hypotheses), ("rank", run_rank))


def run_pipeline(cfg: PipelineConfig) -> dict:
    results = {}
    for name, stage in _STAGES:
        try:
            results[name] = stage(cfg)
        except (ConfigError, StageError):
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
    return results


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="INI config file")
    parser.add_argument("--tracts", type=Path, help="tracts CSV path")
    parser.add_argument("--trips", type=Path, help="raw trips CSV path")
    parser.add_argument("--output-dir", type=Path, help="stage artifact directory")
    parser.add_argument("--seed", type=int, help="random seed (default 42)")
    parser.add_argument("--r", type=int, help="number of components (default 7)")
    parser.add_argument("--n", type=int, help="top-N selection size (default 10)")
    parser.add_argument("--k", type=float, action="append",
                        help="concentration value; repeat for a grid "
                             "(default 0,1,5,10,50,100)")
    parser.add_argument("--include-self-loops", action="store_true",
                        help="keep rides that start and end in the same tract")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripflow",
        description="Discover spatio-temporal mobility clusters in trip data and "
                    "characterize them by Bayesian hypothesis ranking.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "ingest": "clean raw trips and map endpoints to tracts",
        "factorize": "decompose the trip tensor into components",
        "extract-clusters": "select top-N hours/dropoffs per component and count transitions",
        "build-hypotheses": "materialize the hypothesis catalog manifest",
        "rank": "rank hypotheses by log evidence per cluster and overall",
        "synth": "write the deterministic synthetic demo fixture",
        "pipeline": "run all stages in order",
    }
    for name, text in descriptions.items():
        cmd = sub.add_parser(name, help=text, description=text)
        _add_common(cmd)
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {"tracts": args.tracts, "trips": args.trips,
                 "output_dir": args.output_dir, "seed": args.seed,
                 "r": args.r, "n": args.n}
    if args.k:
        overrides["k_grid"] = tuple(args.k)
    if args.include_self_loops:
        overrides["exclude_self_loops"] = False
    return load_config(args.config, **{k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "synth":
            _require(cfg, "output_dir")
            try:
                out = _ensure_output_dir(cfg)
                manifest = write_demo_fixture(out, seed=cfg.seed)
            except Exception as exc:
                raise StageError("synth", exc) from exc
            print(f"synth: wrote fixture to {out} "
                  f"({manifest['planted_trips'] + manifest['background_trips']} trips)")
            return 0
        if args.command == "pipeline":
            results = run_pipeline(cfg)
            for name in results:
                print(f"{name}: ok")
            return 0
        runner = dict(_STAGES)[args.command]
        try:
            result = runner(cfg)
        except (ConfigError, StageError):
            raise
        except Exception as exc:
            raise StageError(args.command, exc) from exc
        print(f"{args.command}: {json.dumps(result, sort_keys=True)}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
