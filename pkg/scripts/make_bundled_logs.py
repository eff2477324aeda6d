# ---------------------------------------------------------------------------
# make_bundled_logs.py -- regenerate the bundled example logs under data/.
#
# Each log is produced by simulating a small hand-written model with a fixed
# seed, so rerunning this script reproduces the exact same bytes.  The logs
# double as regression fixtures: the acceptance suite rediscovers a model
# from each one and checks that a fresh simulation stays close to it.
#
#   m1_choice.csv    ->(a, X(b: 0.7, c: 0.3), d)      exclusive choice
#   m2_parallel.csv  ->(a, +(b, c), d)                true concurrency
#   m3_loop.csv      ->(a, *(b, c){...}, d)           bounded rework loop
#   skip.csv         ->(a, X(b: 0.6, tau: 0.4), c)    optional activity
#
# Usage:  python scripts/make_bundled_logs.py [--out DIR]
# ---------------------------------------------------------------------------
from __future__ import annotations

import argparse
from pathlib import Path

from treesim.eventlog import parse_timestamp, write_csv
from treesim.params import (ActivityProfile, ArrivalKind, ArrivalProfile,
                            Calendar, HandoverMatrix, ParameterSet)
from treesim.ptree import parse_tree
from treesim.simengine import SimConfig, simulate

NUM_CASES = 500
START = "2024-01-01 00:00:00"


def _profile(name: str, mean: float, std: float, capacity: int,
             resources: tuple[str, ...] = ()) -> ActivityProfile:
    return ActivityProfile(activity=name, mean_duration=mean,
                           std_duration=std, capacity=capacity,
                           resources=resources)


def _params(arrival_mean: float,
            profiles: list[ActivityProfile],
            handover: dict[tuple[str, str], int] | None = None) -> ParameterSet:
    return ParameterSet(
        arrival=ArrivalProfile(mean_interarrival=arrival_mean,
                               std_interarrival=arrival_mean,
                               kind=ArrivalKind.EXPONENTIAL),
        activities={p.activity: p for p in profiles},
        handover=HandoverMatrix(dict(handover or {})),
        calendar=Calendar.always_open(),
        process_capacity=None,
    )


def _models() -> dict[str, tuple[str, ParameterSet, int]]:
    """name -> (tree text, generating parameters, seed)."""
    m1 = _params(180.0, [
        _profile("a", 60.0, 15.0, 3),
        _profile("b", 300.0, 60.0, 3, ("r1", "r2", "r3")),
        _profile("c", 200.0, 40.0, 2, ("r2", "r3")),
        _profile("d", 120.0, 30.0, 3),
    ], handover={("r1", "r2"): 3, ("r2", "r3"): 2, ("r3", "r1"): 1})
    m2 = _params(150.0, [
        _profile("a", 50.0, 10.0, 4),
        _profile("b", 180.0, 60.0, 3, ("r1", "r3")),
        _profile("c", 160.0, 70.0, 3, ("r2", "r4")),
        _profile("d", 70.0, 15.0, 4),
    ])
    m3 = _params(150.0, [
        _profile("a", 50.0, 10.0, 3),
        _profile("b", 200.0, 50.0, 3),
        _profile("c", 100.0, 25.0, 3),
        _profile("d", 80.0, 20.0, 3),
    ])
    skip = _params(90.0, [
        _profile("a", 40.0, 10.0, 4),
        _profile("b", 150.0, 30.0, 3),
        _profile("c", 60.0, 15.0, 4),
    ])
    return {
        "m1_choice": ("->(a, X(b: 0.7, c: 0.3), d)", m1, 101),
        "m2_parallel": ("->(a, +(b, c), d)", m2, 202),
        "m3_loop": ("->(a, *(b, c){max_redo=4, p_redo=0.35}, d)", m3, 303),
        "skip": ("->(a, X(b: 0.6, tau: 0.4), c)", skip, 404),
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None,
                        help="output directory (default: <repo>/data)")
    args = parser.parse_args(argv)
    out_dir = Path(args.out) if args.out else Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(parents=True, exist_ok=True)

    start = parse_timestamp(START)
    for name, (text, params, seed) in _models().items():
        tree = parse_tree(text)
        config = SimConfig(num_cases=NUM_CASES, start_time=start, seed=seed)
        result = simulate(tree, params, config)
        if any(result.rejected_or_truncated.values()):
            raise RuntimeError(f"{name}: unexpected truncated/empty traces")
        path = out_dir / f"{name}.csv"
        path.write_bytes(write_csv(result.log))
        print(f"{path}  traces={len(result.log.traces)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
