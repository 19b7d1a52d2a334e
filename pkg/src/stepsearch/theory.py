"""Monte Carlo validation of posterior concentration over a finite family.

A finite family of discrete distributions (one marked as the truth) is
separated in squared Hellinger distance. Drawing n i.i.d. outcomes from the
truth and forming the exact Bayes posterior, the gap between the truth's
top-outcome probability and its posterior-mixture estimate decays
exponentially in n, with the closed-form bound

    p_star * (1 - prior_star) / prior_star * exp(-2 n lambda + 2 log(1/delta))

and the matching minimum sample size. Redundancy discounts the effective
number of independent draws by a factor phi in (0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AssumptionViolation, PersistError, ValidationError

_ATOL = 1e-12


@dataclass(frozen=True)
class ThetaFamily:
    """Finite candidate set of discrete distributions over one alphabet."""

    thetas: tuple[tuple[float, ...], ...]
    true_index: int
    prior: tuple[float, ...]

    def __post_init__(self):
        if len(self.thetas) < 1:
            raise ValidationError("family needs at least one distribution")
        alphabet = len(self.thetas[0])
        if alphabet < 1:
            raise ValidationError("empty outcome alphabet")
        for i, theta in enumerate(self.thetas):
            if len(theta) != alphabet:
                raise ValidationError(f"theta {i} has mismatched alphabet size")
            if any(p < 0 for p in theta):
                raise ValidationError(f"theta {i} has negative mass")
            if abs(sum(theta) - 1.0) > _ATOL:
                raise ValidationError(f"theta {i} does not sum to 1")
        if len(self.prior) != len(self.thetas):
            raise ValidationError("prior length != number of thetas")
        if any(p < 0 for p in self.prior):
            raise ValidationError("negative prior mass")
        if abs(sum(self.prior) - 1.0) > _ATOL:
            raise ValidationError("prior does not sum to 1")
        if not 0 <= self.true_index < len(self.thetas):
            raise ValidationError(f"true_index {self.true_index} out of range")

    @classmethod
    def bernoulli_pair(
        cls, p_other: float = 0.5, p_star: float = 0.9, prior=(0.5, 0.5)
    ) -> "ThetaFamily":
        """The default family: truth Bernoulli(p_star) vs Bernoulli(p_other)."""
        return cls(
            thetas=((1.0 - p_other, p_other), (1.0 - p_star, p_star)),
            true_index=1,
            prior=tuple(prior),
        )

    def top_outcome(self) -> int:
        """argmax_s P(s | theta*); must be unique."""
        truth = self.thetas[self.true_index]
        best = max(truth)
        winners = [i for i, p in enumerate(truth) if p == best]
        if len(winners) != 1:
            raise AssumptionViolation(
                f"argmax outcome under theta* is not unique ({len(winners)} ties)"
            )
        return winners[0]


@dataclass(frozen=True)
class SeparationProfile:
    lambda_t: float
    lambda_star: float

    def __post_init__(self):
        if self.lambda_t <= 0 or self.lambda_star <= 0:
            raise AssumptionViolation(
                f"separation must be positive, got lambda_t={self.lambda_t}"
            )


@dataclass(frozen=True)
class RedundancyModel:
    """Per-class duplicate counts and information discounts phi in (0, 1]."""

    class_counts: tuple[int, ...]
    phis: tuple[float, ...]

    def __post_init__(self):
        if len(self.class_counts) != len(self.phis):
            raise ValidationError("class_counts and phis differ in length")
        if not self.class_counts:
            raise ValidationError("empty redundancy model")
        if any(c < 1 for c in self.class_counts):
            raise ValidationError("class counts must be positive")
        if any(not 0 < phi <= 1 for phi in self.phis):
            raise ValidationError("each phi must lie in (0, 1]")


@dataclass(frozen=True)
class SimResult:
    n_grid: tuple[int, ...]
    mean_posterior_error: tuple[float, ...]
    bound_values: tuple[float, ...]
    trials: int
    seed: int

    def __post_init__(self):
        if not len(self.n_grid) == len(self.mean_posterior_error) == len(self.bound_values):
            raise ValidationError("result arrays differ in length")

    def write_csv(self, path: str | Path) -> None:
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["n", "mean_error", "bound", "trials", "seed"])
                for n, err, bound in zip(
                    self.n_grid, self.mean_posterior_error, self.bound_values
                ):
                    writer.writerow([n, repr(err), repr(bound), self.trials, self.seed])
        except OSError as e:
            raise PersistError(f"cannot write CSV to {path}: {e}") from e


# ------------------------------------------------------------------ formulas


def hellinger_sq(p, q) -> float:
    """H^2(p, q) = 1 - sum_i sqrt(p_i * q_i), in [0, 1]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if (dist < 0).any() or abs(float(dist.sum()) - 1.0) > 1e-9:
            raise ValidationError(f"{name} is not a normalized distribution")
    value = 1.0 - float(np.sqrt(p * q).sum())
    return min(max(value, 0.0), 1.0)


def separation(family: ThetaFamily) -> SeparationProfile:
    """Minimum squared Hellinger distance from theta* to every alternative."""
    if len(family.thetas) < 2:
        raise AssumptionViolation("separation needs at least two candidate thetas")
    truth = family.thetas[family.true_index]
    lam = min(
        hellinger_sq(theta, truth)
        for i, theta in enumerate(family.thetas)
        if i != family.true_index
    )
    return SeparationProfile(lambda_t=lam, lambda_star=lam)


def error_bound(
    n: int, lambda_t: float, delta: float, prior_star: float, p_star: float
) -> float:
    """The closed-form decay bound, exactly as printed."""
    _check_domain(lambda_t, delta, prior_star)
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    if not 0 <= p_star <= 1:
        raise ValidationError(f"p_star must be a probability, got {p_star}")
    return (
        p_star
        * (1.0 - prior_star)
        / prior_star
        * math.exp(-2.0 * n * lambda_t + 2.0 * math.log(1.0 / delta))
    )


def min_sample_size(lambda_t: float, delta: float, prior_star: float) -> int:
    """Smallest n with n >= (log(1/delta) + log((1-pi*)/pi*)) / lambda, >= 1."""
    _check_domain(lambda_t, delta, prior_star)
    value = (math.log(1.0 / delta) + math.log((1.0 - prior_star) / prior_star)) / lambda_t
    return max(1, math.ceil(value))


def _check_domain(lambda_t: float, delta: float, prior_star: float) -> None:
    if lambda_t <= 0:
        raise ValidationError(f"lambda_t must be > 0, got {lambda_t}")
    if not 0 < delta <= 1:
        raise ValidationError(f"delta must be in (0, 1], got {delta}")
    if not 0 < prior_star < 1:
        raise ValidationError(f"prior_star must be in (0, 1), got {prior_star}")


def effective_information(model: RedundancyModel) -> float:
    """Sum of class_count * phi: the independent-equivalent sample count."""
    return float(sum(c * phi for c, phi in zip(model.class_counts, model.phis)))


# ---------------------------------------------------------------- simulation


def posterior_error(family: ThetaFamily, n: int, trials: int, seed: int) -> float:
    """Monte Carlo mean of p_star - p_s over exact Bayes posteriors.

    Each trial draws n i.i.d. outcomes from the true distribution, forms the
    posterior over the family, and mixes every candidate's probability of the
    truth's top outcome. n = 0 evaluates the prior mixture.
    """
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    if len(family.thetas) == 1:
        return 0.0

    top = family.top_outcome()
    thetas = np.asarray(family.thetas, dtype=float)
    truth = thetas[family.true_index]
    p_star = float(truth[top])
    top_probs = thetas[:, top]
    with np.errstate(divide="ignore"):
        log_thetas = np.log(thetas)
        log_prior = np.log(np.asarray(family.prior, dtype=float))

    total = 0.0
    terms = np.empty_like(log_thetas)
    for trial in range(trials):
        rng = np.random.default_rng((seed, n, trial))
        counts = rng.multinomial(n, truth)
        # Skip unobserved outcomes entirely: a zero count contributes nothing,
        # even when the candidate assigns that outcome zero probability.
        occupied = np.broadcast_to(counts > 0, terms.shape)
        terms.fill(0.0)
        np.multiply(counts[None, :], log_thetas, out=terms, where=occupied)
        log_post = log_prior + terms.sum(axis=1)
        log_post -= log_post.max()
        weights = np.exp(log_post)
        posterior = weights / weights.sum()
        total += p_star - float(posterior @ top_probs)
    return total / trials


def _effective_draws(n: int, redundancy) -> int:
    if redundancy is None:
        return n
    if isinstance(redundancy, RedundancyModel):
        ratio = effective_information(redundancy) / sum(redundancy.class_counts)
    else:
        ratio = float(redundancy)
        if not 0 < ratio <= 1:
            raise ValidationError(f"uniform phi must lie in (0, 1], got {ratio}")
    return math.ceil(n * ratio)


def run_decay_experiment(
    family: ThetaFamily,
    n_grid,
    trials: int = 2000,
    redundancy: RedundancyModel | float | None = None,
    seed: int = 0,
    delta: float = 0.05,
    csv_path: str | Path | None = None,
) -> SimResult:
    """Error and bound across a sample-size grid, optionally discounted.

    `redundancy` may be a uniform phi in (0, 1] or a RedundancyModel, whose
    effective-information ratio rescales the number of informative draws to
    ceil(n * ratio) at every grid point.
    """
    profile = separation(family)
    prior_star = family.prior[family.true_index]
    truth = family.thetas[family.true_index]
    p_star = truth[family.top_outcome()]

    n_grid = tuple(int(n) for n in n_grid)
    errors = []
    bounds = []
    for n in n_grid:
        n_draw = _effective_draws(n, redundancy)
        errors.append(posterior_error(family, n_draw, trials, seed))
        bounds.append(error_bound(n_draw, profile.lambda_t, delta, prior_star, p_star))
    result = SimResult(
        n_grid=n_grid,
        mean_posterior_error=tuple(errors),
        bound_values=tuple(bounds),
        trials=trials,
        seed=seed,
    )
    if csv_path is not None:
        result.write_csv(csv_path)
    return result
