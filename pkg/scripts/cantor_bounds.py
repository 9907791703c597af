"""Distance between Cantor iterates and the fixed point, against both uniform bounds."""

import argparse
from dataclasses import dataclass, field

from driftless_sde.cantor import holder_lambda, iterate_error_bound, sup01
from driftless_sde.coefficients import DiffusionSpec, default_grid, sup_distance


@dataclass
class Config:
    lambdas: list[float] = field(default_factory=lambda: [1 / 3, 0.5, 0.75])
    bases: list[str] = field(default_factory=lambda: ["zero", "identity"])
    max_n: int = 12


def main(cfg: Config):
    print("lambda,H,base,n,delta,lemma_bound,simple_bound")
    for lam in cfg.lambdas:
        exact = DiffusionSpec.cantor(lam)
        grid = default_grid(exact)
        H = holder_lambda(lam).value
        for base in cfg.bases:
            s01 = sup01(lam, base)
            for n in range(1, cfg.max_n + 1):
                d = sup_distance(exact, DiffusionSpec.cantor(lam, n, base), grid)
                print(f"{lam!r},{H!r},{base},{n},{d!r},{iterate_error_bound(n, s01)!r},{2.0 ** (2 - n)!r}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--lambdas", type=float, nargs="+", default=Config().lambdas)
    p.add_argument("--max-n", type=int, default=Config.max_n)
    a = p.parse_args()
    main(Config(lambdas=a.lambdas, max_n=a.max_n))
