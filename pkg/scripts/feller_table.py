"""Boundary classification of sigma(x) = |x|^alpha over a range of exponents."""

import argparse
from dataclasses import dataclass, field

from driftless_sde.coefficients import DiffusionSpec
from driftless_sde.feller import FellerConfig, classify_boundary


@dataclass
class Config:
    alphas: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.4, 0.5, 0.75, 1.0, 1.5])
    c: float = 0.5


def name(s):
    for key in ("alpha", "lambda"):
        if key in s.params:
            return f"{s.kind}({s.params[key]:g})"
    return s.kind


def fmt(limit):
    return "inf" if limit.divergent else f"{limit.value:.6g}"


def main(cfg: Config):
    print(f"{'coefficient':<18}{'mu(0+)':>12}{'nu(0+)':>12}  classification      uniqueness")
    specs = [DiffusionSpec.power_law(a) for a in cfg.alphas]
    specs += [DiffusionSpec.girsanov(0.25), DiffusionSpec.tanaka(), DiffusionSpec.cantor(0.5)]
    for s in specs:
        rep = classify_boundary(s, FellerConfig(c=cfg.c), monotone_declared=True, sigma_zero_is_zero=s(0.0) == 0.0)
        print(f"{name(s):<18}{fmt(rep.mu_limit):>12}{fmt(rep.nu_limit):>12}  "
              f"{rep.classification.value:<20}{rep.pathwise_uniqueness}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alphas", type=float, nargs="+", default=Config().alphas)
    p.add_argument("--c", type=float, default=Config.c)
    a = p.parse_args()
    main(Config(a.alphas, a.c))
