from dataclasses import dataclass

from factcurve.utils.errors import DegenerateEstimateError, NonConvergenceError, PositionDomainError

# Self-Known + Self-Unknown at or above 2 - DEGENERACY_EPS leaves the estimate undefined
DEGENERACY_EPS = 1e-9

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
SIGMA_START = 0.5


def _check_fraction(name, value):
    if not 0.0 <= value <= 1.0:
        raise PositionDomainError(f"{name} must be in [0, 1], got {value}.")


@dataclass(frozen=True)
class SelfScorePair:
    self_known: float
    self_unknown: float

    def __post_init__(self):
        _check_fraction("self_known", self.self_known)
        _check_fraction("self_unknown", self.self_unknown)

    @property
    def is_degenerate(self):
        return self.self_known + self.self_unknown >= 2.0 - DEGENERACY_EPS


@dataclass(frozen=True)
class FactualityEstimate:
    sigma: float


@dataclass(frozen=True)
class OracleResult:
    sigma: float
    iterations: int
    identifiable: bool


def estimate_factuality(scores):
    """
    Factuality implied by a model's self-judgment scores.

    If a model judges its supported claims correct with probability Self-Known and its
    unsupported claims incorrect with probability Self-Unknown, and judges "correct" as often
    as its claims are supported, the supported share is

        sigma = (1 - Self-Unknown) / (2 - Self-Unknown - Self-Known)

    :param scores: SelfScorePair.
    :return: FactualityEstimate.
    :raises DegenerateEstimateError: when Self-Known + Self-Unknown is (numerically) 2.
    """
    if scores.is_degenerate:
        raise DegenerateEstimateError(
            f"Self-Known {scores.self_known} and Self-Unknown {scores.self_unknown} leave factuality undefined.")
    sigma = (1.0 - scores.self_unknown) / (2.0 - scores.self_unknown - scores.self_known)
    return FactualityEstimate(sigma=sigma)


def analytic_sigma(self_known, self_unknown):
    """The closed-form estimate as a bare float."""
    return estimate_factuality(SelfScorePair(self_known, self_unknown)).sigma


def fixed_point_oracle(self_known, self_unknown, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """
    Solves sigma = SK * sigma + (1 - SU) * (1 - sigma) by iteration from sigma = 0.5.

    The map is affine with slope SK + SU - 1. With slope 1 (SK = SU = 1) every sigma is a
    fixed point; the start value is returned and flagged as not identifiable.

    :return: OracleResult.
    :raises NonConvergenceError: when |delta| stays >= tol for max_iter steps.
    """
    _check_fraction("self_known", self_known)
    _check_fraction("self_unknown", self_unknown)
    slope = self_known + self_unknown - 1.0
    if slope >= 1.0:
        return OracleResult(sigma=SIGMA_START, iterations=0, identifiable=False)

    sigma = SIGMA_START
    for iteration in range(1, max_iter + 1):
        updated = self_known * sigma + (1.0 - self_unknown) * (1.0 - sigma)
        if abs(updated - sigma) < tol:
            return OracleResult(sigma=updated, iterations=iteration, identifiable=True)
        sigma = updated
    raise NonConvergenceError(
        f"No fixed point within {max_iter} iterations for Self-Known {self_known}, Self-Unknown {self_unknown}.")


def estimate_per_bucket(bucket_scores):
    """
    Applies estimate_factuality bucket by bucket.

    :param bucket_scores: Sequence of SelfScorePair, None where a bucket has no pair.
    :return: List aligned with the input; each item is a FactualityEstimate, None for an
             absent pair, or the DegenerateEstimateError raised for that bucket.
    """
    estimates = []
    for scores in bucket_scores:
        if scores is None:
            estimates.append(None)
            continue
        try:
            estimates.append(estimate_factuality(scores))
        except DegenerateEstimateError as e:
            estimates.append(e)
    return estimates
