"""
Claim-stream simulator.

Draws claims whose labels and self-judgments follow exactly the assumptions the
factuality estimate rests on, so the estimate can be checked against a known truth.

Random numbers come from numpy's PCG64 bit generator seeded with the configured seed.
The draw order is fixed: first n_claims uniforms decide the labels (Supported when
u < true_sigma), then n_claims uniforms decide the judgments (a Supported claim is judged
correct when u < self_known, an Unsupported claim is judged incorrect when u < self_unknown).
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from factcurve.estimation.estimator import SelfScorePair, estimate_factuality
from factcurve.utils.errors import ConfigError, DegenerateEstimateError

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class SimulationConfig:
    n_claims: int
    true_sigma: float
    self_known: float
    self_unknown: float
    seed: int = 42

    def __post_init__(self):
        if not isinstance(self.n_claims, int) or self.n_claims <= 0:
            raise ConfigError(f"n_claims must be a positive integer, got {self.n_claims}.")
        for name in ("true_sigma", "self_known", "self_unknown"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}.")


@dataclass(frozen=True)
class SimulationResult:
    config: SimulationConfig
    empirical_self_known: Optional[float]
    empirical_self_unknown: Optional[float]
    empirical_judged_correct_fraction: float
    n_supported: int
    n_unsupported: int

    @property
    def rates(self):
        return self.empirical_self_known, self.empirical_self_unknown, self.empirical_judged_correct_fraction

    def estimate(self):
        """Factuality estimated from the empirical rates; None when a rate is absent or degenerate."""
        if self.empirical_self_known is None or self.empirical_self_unknown is None:
            return None
        try:
            return estimate_factuality(SelfScorePair(self.empirical_self_known, self.empirical_self_unknown)).sigma
        except DegenerateEstimateError:
            return None

    def analytic_sigma(self):
        pair = SelfScorePair(self.config.self_known, self.config.self_unknown)
        return None if pair.is_degenerate else estimate_factuality(pair).sigma

    def to_dict(self):
        return {
            "config": asdict(self.config),
            "rng": RNG_ALGORITHM,
            "empirical_rates": {
                "self_known": self.empirical_self_known,
                "self_unknown": self.empirical_self_unknown,
                "judged_correct_fraction": self.empirical_judged_correct_fraction,
                "n_supported": self.n_supported,
                "n_unsupported": self.n_unsupported,
            },
            "analytic_sigma": self.analytic_sigma(),
            "estimate": self.estimate(),
        }


def simulate_claim_stream(cfg):
    """
    Simulates cfg.n_claims claims and the generating model's judgments of them.

    :param cfg: SimulationConfig.
    :return: SimulationResult; an empirical rate is None when no claim of its label was drawn.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    supported = rng.random(cfg.n_claims) < cfg.true_sigma
    draws = rng.random(cfg.n_claims)

    judged_correct = np.where(supported, draws < cfg.self_known, draws >= cfg.self_unknown)

    n_supported = int(supported.sum())
    n_unsupported = cfg.n_claims - n_supported
    self_known = float(judged_correct[supported].mean()) if n_supported else None
    self_unknown = float((~judged_correct[~supported]).mean()) if n_unsupported else None

    return SimulationResult(
        config=cfg,
        empirical_self_known=self_known,
        empirical_self_unknown=self_unknown,
        empirical_judged_correct_fraction=float(judged_correct.mean()),
        n_supported=n_supported,
        n_unsupported=n_unsupported,
    )
