"""Run a stability-rate preset and print the table plus both fitted statistics.

    python scripts/run_rates.py cor1.5-cantor-eps --paths 2000 --n 2 3 4 5
"""

import argparse
import warnings
from dataclasses import dataclass

from driftless_sde.cli import cmd_rates, load_preset
from driftless_sde.stability import RateWarning


@dataclass
class Config:
    preset: str
    paths: int | None = None
    n: list[int] | None = None
    seed: int = 0


def main(cfg: Config):
    run = load_preset(cfg.preset)
    if run.command != "rates":
        raise SystemExit(f"{cfg.preset} is a {run.command} preset")
    run.seed = cfg.seed
    if cfg.paths:
        run.params["sim"]["paths"] = cfg.paths
    if cfg.n:
        run.params["n"] = cfg.n
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RateWarning)
        summary, columns, rows = cmd_rates(run)
    for w in caught:
        print(f"# warning: {w.message}")
    print(",".join(columns))
    for r in rows:
        print(",".join(repr(v) for v in r))
    for k, v in summary.items():
        print(f"# {k}: {v}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("preset")
    p.add_argument("--paths", type=int)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    main(Config(a.preset, a.paths, a.n, a.seed))
