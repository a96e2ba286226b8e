"""Entropy profiles of convolution powers and continuity experiments.

The asymptotic entropy per step is bracketed from a finite profile: the
subadditive upper bound min_n H(n)/n is certified, while the lower bound
(the last entropy increment) is a heuristic that happens to be exact in the
limit but carries no finite-n guarantee; it is tagged as such.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from .errors import ResourceError, UsageError, ValidationError
from .measures import (EXACT, MeasureFamily, ProbMeasure, TruncationPolicy,
                       convolve, delta, shannon_entropy)

LOWER_BOUND_CAVEAT = "last-increment heuristic; no finite-n certificate"


@dataclass
class EntropyProfile:
    """H(mu^{*n}) for n = 1..n_max with the running truncation deficit."""

    measure_id: str
    entries: List[Tuple[int, float, float]]  # (n, entropy nats, deficit)
    policy: TruncationPolicy
    truncated_at: Optional[int] = None  # set when a resource limit cut the run

    def entropy_at(self, n: int) -> float:
        for m, h, _ in self.entries:
            if m == n:
                return h
        raise UsageError(f"profile has no entry for n={n}")

    @property
    def max_deficit(self) -> float:
        return max(d for _, _, d in self.entries)


@dataclass
class EntropyBracket:
    lower: float
    upper: float
    n_used: int
    caveat: str = LOWER_BOUND_CAVEAT


def avez_profile(mu: ProbMeasure, n_max: int,
                 policy: TruncationPolicy = EXACT,
                 measure_id: str = "mu",
                 budget: int = 5_000_000) -> EntropyProfile:
    """Entropy profile of convolution powers up to n_max.

    On resource overflow the profile is returned truncated at the last
    feasible n, with ``truncated_at`` marking the cut.
    """
    if n_max < 1:
        raise UsageError("avez_profile needs n_max >= 1")
    entries = []
    acc = delta(mu.group)
    truncated_at = None
    for n in range(1, n_max + 1):
        try:
            acc = convolve(acc, mu, policy, budget=budget)
        except ResourceError:
            truncated_at = n
            break
        entries.append((n, shannon_entropy(acc), acc.mass_deficit))
    if not entries:
        raise ResourceError("profile infeasible even at n = 1")
    return EntropyProfile(measure_id, entries, policy, truncated_at)


def entropy_bracket(profile: EntropyProfile) -> EntropyBracket:
    """Bracket for the per-step entropy: certified subadditive upper bound
    min_n H(n)/n, heuristic lower bound H(n_max) - H(n_max - 1)."""
    if len(profile.entries) < 2:
        raise UsageError("entropy_bracket needs a profile with >= 2 entries")
    if profile.max_deficit > 0.0:
        raise ValidationError(
            f"bracket refused: profile carries truncation deficit "
            f"{profile.max_deficit:g}; rerun with the exact policy")
    upper = min(h / n for n, h, _ in profile.entries)
    n_last, h_last, _ = profile.entries[-1]
    _, h_prev, _ = profile.entries[-2]
    lower = max(0.0, h_last - h_prev)
    return EntropyBracket(lower=lower, upper=upper, n_used=n_last)


@dataclass
class ContinuityRow:
    k: int
    step_entropy: float
    profile: EntropyProfile
    bracket: Optional[EntropyBracket]
    diffs: List[float]  # |H(mu_k^{*n}) - H(mu^{*n})| for n = 1..n_max


@dataclass
class ContinuityTable:
    limit_step_entropy: float
    limit_profile: EntropyProfile
    limit_bracket: Optional[EntropyBracket]
    rows: List[ContinuityRow]
    n_max: int
    warnings: List[str] = field(default_factory=list)


def continuity_experiment(family: MeasureFamily, k_list: Sequence[int],
                          n_max: int,
                          policy: TruncationPolicy = EXACT,
                          budget: int = 5_000_000) -> ContinuityTable:
    """Entropy profiles of family members against the limit at fixed n.

    All verdicts are at finite n; the run attaches warnings instead of
    failing when audit heuristics (growth degree, non-degeneracy witness)
    are missing.
    """
    warnings = []
    mu = family.limit
    spec = mu.group.spec
    if spec.kind == "wreath":
        base_growth = spec.base.declared_growth_degree
        if base_growth is None:
            warnings.append("wreath base has no declared growth degree")
        elif isinstance(base_growth, int) and base_growth < 3:
            warnings.append(
                f"wreath base growth degree {base_growth} < 3; the "
                f"continuity statement being probed assumes at least cubic")
    limit_profile = avez_profile(mu, n_max, policy, "limit", budget)
    limit_bracket = _try_bracket(limit_profile)
    rows = []
    for k in k_list:
        mk = family(k)
        prof = avez_profile(mk, n_max, policy, f"k={k}", budget)
        rows.append(ContinuityRow(
            k=k,
            step_entropy=shannon_entropy(mk),
            profile=prof,
            bracket=_try_bracket(prof),
            diffs=[abs(h - limit_profile.entropy_at(n))
                   for n, h, _ in prof.entries],
        ))
    return ContinuityTable(shannon_entropy(mu), limit_profile, limit_bracket,
                           rows, n_max, warnings)


def _try_bracket(profile: EntropyProfile) -> Optional[EntropyBracket]:
    try:
        return entropy_bracket(profile)
    except (UsageError, ValidationError):
        return None


@dataclass
class SemicontinuityVerdict:
    passed: bool
    margin: float  # upper_limit + tolerance - upper_k (>= 0 iff passed)
    k_used: int
    flags: List[str]


def semicontinuity_check(table: ContinuityTable,
                         tolerance: float = 1e-9) -> SemicontinuityVerdict:
    """Check that the certified upper bound of the largest materialized k
    does not exceed the limit's upper bound beyond the tolerance.

    The check also audits its own precondition: when the step entropies of
    the family fail to approach the limit's (e.g. a contaminant of growing
    support), a flag is raised since the semicontinuity statement does not
    apply to such a family.
    """
    if not table.rows:
        raise UsageError("semicontinuity_check needs at least one family row")
    flags = []
    gaps = [abs(row.step_entropy - table.limit_step_entropy)
            for row in table.rows]
    if len(gaps) >= 2 and gaps[-1] > gaps[0] + 1e-12:
        flags.append("step entropies are not converging to the limit's; "
                     "precondition violated")
    last = max(table.rows, key=lambda r: r.k)
    if last.bracket is None or table.limit_bracket is None:
        flags.append("bracket unavailable (deficits present)")
        return SemicontinuityVerdict(False, float("nan"), last.k, flags)
    margin = table.limit_bracket.upper + tolerance - last.bracket.upper
    return SemicontinuityVerdict(margin >= 0.0, margin, last.k, flags)
