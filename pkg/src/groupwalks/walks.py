"""Trajectory sampling and escape-probability machinery.

Estimators come in three independent routes that the test suite plays
against each other: Monte Carlo (never-return fraction and range rate),
partial Green sums with an optional polynomial tail model, and
characteristic-function quadrature on integer lattices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ResourceError, UsageError
from .groups import Element, LatticeGroup
from .measures import EXACT, ProbMeasure, TruncationPolicy, convolve, delta
from .rng import sample_stream, seed_tag


@dataclass(frozen=True)
class WalkConfig:
    """Sampling plan: path length, sample count, and master seed."""

    steps: int
    samples: int
    master_seed: int = 0
    first_return_horizon: Optional[int] = None

    def __post_init__(self):
        if self.steps < 1 or self.samples < 1:
            raise UsageError("WalkConfig needs steps >= 1 and samples >= 1")

    @property
    def horizon(self) -> int:
        return self.first_return_horizon or self.steps


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    std_error: float
    samples: int
    method: str


@dataclass
class Trajectory:
    """One sampled path w_0..w_n with its increments and RNG provenance."""

    elements: List[Element]
    increments: List[Element]
    seed_tag: str

    def __len__(self) -> int:
        return len(self.increments)


def _increment_indices(mu: ProbMeasure, cfg: WalkConfig, index: int) -> np.ndarray:
    _, cdf = mu.sampler()
    u = sample_stream(cfg.master_seed, index).random(cfg.steps)
    return np.searchsorted(cdf, u, side="right")


def sample_path(mu: ProbMeasure, cfg: WalkConfig, index: int) -> Trajectory:
    """Sample one trajectory; increments are inverse-CDF draws over atoms in
    canonical-key order, so identical inputs replay identical paths."""
    if index >= cfg.samples:
        raise UsageError(f"sample index {index} >= samples {cfg.samples}")
    elems, _ = mu.sampler()
    idx = _increment_indices(mu, cfg, index)
    increments = [elems[i] for i in idx]
    path = [mu.group.identity()]
    for g in increments:
        path.append(path[-1] * g)
    return Trajectory(path, increments, seed_tag(cfg.master_seed, index))


def range_stat(traj: Trajectory) -> int:
    """Number of distinct elements visited, via canonical keys."""
    return len({w.key for w in traj.elements})


# -- vectorized lattice paths ---------------------------------------------------

def _lattice_support(mu: ProbMeasure) -> np.ndarray:
    elems, _ = mu.sampler()
    return np.array([e.payload for e in elems], dtype=np.int64)


def _lattice_positions(vecs: np.ndarray, idx: np.ndarray) -> np.ndarray:
    steps = idx.shape[0]
    pos = np.empty((steps + 1, vecs.shape[1]), dtype=np.int64)
    pos[0] = 0
    np.cumsum(vecs[idx], axis=0, out=pos[1:])
    return pos


def _distinct_rows(pos: np.ndarray) -> int:
    return np.unique(pos, axis=0).shape[0]


@dataclass
class EscapeEstimates:
    """Both Monte Carlo escape estimators for one (measure, config) pair.

    ``first_return`` counts paths that avoid the identity up to the horizon
    and is biased upward by the finite horizon; ``range_rate`` is the mean
    of R_n/n and is the headline consistent estimator.
    """

    first_return: EstimateWithCI
    range_rate: EstimateWithCI


def escape_mc(mu: ProbMeasure, cfg: WalkConfig) -> EscapeEstimates:
    """Monte Carlo escape probability via never-return fraction and R_n/n."""
    horizon = cfg.horizon
    never = 0
    rates = np.empty(cfg.samples)
    if isinstance(mu.group, LatticeGroup):
        vecs = _lattice_support(mu)
        for i in range(cfg.samples):
            pos = _lattice_positions(vecs, _increment_indices(mu, cfg, i))
            at_e = np.all(pos[1:] == 0, axis=1)
            if not at_e[:horizon].any():
                never += 1
            rates[i] = _distinct_rows(pos) / cfg.steps
    else:
        ident = mu.group.identity().key
        elems, _ = mu.sampler()
        for i in range(cfg.samples):
            idx = _increment_indices(mu, cfg, i)
            w = mu.group.identity()
            seen = {w.key}
            hit_e = False
            for step, j in enumerate(idx, start=1):
                w = w * elems[j]
                k = w.key
                if step <= horizon and k == ident:
                    hit_e = True
                seen.add(k)
            if not hit_e:
                never += 1
            rates[i] = len(seen) / cfg.steps
    p = never / cfg.samples
    first = EstimateWithCI(
        point=p,
        std_error=math.sqrt(p * (1 - p) / cfg.samples),
        samples=cfg.samples,
        method=f"first-return(horizon={horizon},bias=+)")
    rr = EstimateWithCI(
        point=float(rates.mean()),
        std_error=float(rates.std(ddof=1) / math.sqrt(cfg.samples))
        if cfg.samples > 1 else 0.0,
        samples=cfg.samples,
        method="range-rate")
    return EscapeEstimates(first, rr)


# -- Green sums -------------------------------------------------------------------

def _green_terms(mu: ProbMeasure, n_max: int,
                 policy: TruncationPolicy = EXACT) -> Tuple[List[float], float]:
    identity = mu.group.identity()
    acc = delta(mu.group)
    terms = [1.0]
    for _ in range(n_max):
        acc = convolve(acc, mu, policy)
        terms.append(acc.mass_of(identity))
    return terms, acc.mass_deficit


def green_sum(mu: ProbMeasure, n_max: int,
              policy: TruncationPolicy = EXACT) -> Tuple[float, float]:
    """Partial sum of return probabilities up to n_max, plus the final term."""
    if n_max < 0:
        raise UsageError("green_sum needs n_max >= 0")
    terms, _ = _green_terms(mu, n_max, policy)
    return float(sum(terms)), terms[-1]


def _bipartite_support(mu: ProbMeasure) -> bool:
    """True when every support atom has odd coordinate sum, which forces the
    walk to alternate parity and return only at even times."""
    if not isinstance(mu.group, LatticeGroup):
        return False
    return all(sum(g.payload) % 2 == 1 for g in mu.support())


def _poly_tail(C: float, d: float, n_max: int, even_only: bool) -> float:
    """Upper bound on sum_{n > n_max} C n^{-d/2} over the active parity class."""
    s = d / 2.0
    cutoff = 1_000_000
    n = np.arange(n_max + 1, cutoff, dtype=float)
    if even_only:
        n = n[(n % 2) == 0]
    partial = float((n ** -s).sum()) if n.size else 0.0
    remainder = cutoff ** (1.0 - s) / (s - 1.0) if s > 1 else math.inf
    return C * (partial + remainder)


@dataclass
class GreenEscape:
    """Escape probability derived from a partial Green sum."""

    point: Optional[float]
    lower: Optional[float]
    upper: Optional[float]
    conclusive: bool
    verdict: str
    partial_sum: float
    last_term: float
    deficit_flagged: bool

    def as_estimate(self) -> EstimateWithCI:
        if self.point is None:
            raise UsageError("inconclusive Green verdict has no point value")
        half = 0.0
        if self.lower is not None and self.upper is not None:
            half = (self.upper - self.lower) / 2.0
        return EstimateWithCI(self.point, half, 0, "green-sum")


def escape_from_green(mu: ProbMeasure, n_max: int,
                      tail_model: Optional[Tuple[float, float]] = None,
                      policy: TruncationPolicy = EXACT,
                      stabilization_threshold: float = 1e-2) -> GreenEscape:
    """1/(partial Green sum), plus a certified interval when a polynomial
    tail model (C, d) is supplied.

    With a tail model the interval is [1/(S + tailbound), 1/S].  Without
    one, the verdict is inconclusive unless the recent terms have decayed
    below the stabilization threshold (the last two are checked, so the
    exact zeros of period-2 walks do not fake stability).
    """
    terms, deficit = _green_terms(mu, n_max, policy)
    S = float(sum(terms))
    last = terms[-1]
    deficit_flagged = deficit > 0.0
    if tail_model is not None:
        C, d = tail_model
        if d < 3:
            raise UsageError("tail model needs d >= 3 for a summable tail")
        even_only = _bipartite_support(mu)
        if even_only and any(t != 0.0 for t in terms[1::2]):
            even_only = False
        bound = _poly_tail(C, d, n_max, even_only)
        verdict = "interval"
        if deficit_flagged:
            verdict = "interval-lower-bound-only"
        return GreenEscape(1.0 / S, 1.0 / (S + bound), 1.0 / S, True,
                           verdict, S, last, deficit_flagged)
    recent = max(terms[-1], terms[-2]) if len(terms) >= 2 else terms[-1]
    if recent > stabilization_threshold:
        return GreenEscape(None, None, None, False, "inconclusive",
                           S, last, deficit_flagged)
    verdict = "point" if not deficit_flagged else "point-upper-bound-only"
    return GreenEscape(1.0 / S, None, None, True, verdict, S, last,
                       deficit_flagged)


# -- characteristic-function quadrature ---------------------------------------------

Recurrent = str  # the literal "recurrent"


def _cf_integral(vecs: np.ndarray, masses: np.ndarray, m: int) -> float:
    """Midpoint-rule average of Re(1/(1 - phi(k))) over [-pi, pi]^d.

    The midpoint grid with even m never lands on k = 0, where the
    integrand has its integrable singularity.
    """
    d = vecs.shape[1]
    h = 2 * math.pi / m
    k1 = -math.pi + h * (np.arange(m) + 0.5)
    shape_for = lambda axis: tuple(m if j == axis else 1 for j in range(d))
    re = np.zeros((m,) * d)
    im = np.zeros((m,) * d)
    for v, mass in zip(vecs, masses):
        phase = np.zeros((1,) * d)
        for axis in range(d):
            if v[axis]:
                phase = phase + k1.reshape(shape_for(axis)) * float(v[axis])
        re += mass * np.cos(phase)
        im += mass * np.sin(phase)
    one_minus = 1.0 - re
    denom = one_minus * one_minus + im * im
    with np.errstate(divide="ignore", invalid="ignore"):
        w = one_minus / denom
    return float(np.mean(w))


def chung_fuchs_escape(mu: ProbMeasure, grid: int = 64, refinements: int = 3,
                       growth_factor: float = 1.5,
                       budget: int = 1 << 25) -> Union[EstimateWithCI, Recurrent]:
    """Escape probability from tensor quadrature of the characteristic
    function, or the literal "recurrent" when refinements diverge.

    Midpoint sums at doubling resolutions feed a two-level Richardson
    cascade (orders 1 then 2).  Divergence is declared when successive raw
    integrals grow by more than ``growth_factor`` twice in a row; this
    catches polynomial divergence (recurrent walks in d <= 2 with zero
    mean) but not slower logarithmic growth.
    """
    group = mu.group
    if not isinstance(group, LatticeGroup):
        raise UsageError("chung_fuchs_escape is defined on integer lattices")
    if mu.mass_deficit != 0.0:
        raise UsageError("chung_fuchs_escape needs an exact measure")
    if refinements < 3:
        raise UsageError("need at least 3 refinements for the cascade")
    if grid % 2 or grid < 2:
        raise UsageError("grid size must be even and >= 2")
    pairs = mu.atoms()
    if len(pairs) == 1:
        g = pairs[0][0]
        if g.is_identity():
            return "recurrent"
        return EstimateWithCI(1.0, 0.0, 0, "degenerate-shift")
    vecs = np.array([g.payload for g, _ in pairs], dtype=np.int64)
    masses = np.array([m for _, m in pairs])
    d = group.d
    mean = masses @ vecs
    if d <= 2 and np.any(np.abs(mean) > 1e-12):
        raise UsageError(
            "quadrature at t = 1 is unreliable for drifting walks in d <= 2; "
            "use the Green-sum estimators instead")
    sizes = [grid * (1 << r) for r in range(refinements)]
    if max(sizes) ** d > budget:
        raise ResourceError(
            f"grid {max(sizes)}^{d} exceeds node budget {budget}")
    raw = [_cf_integral(vecs, masses, m) for m in sizes]
    if any(not math.isfinite(x) for x in raw):
        return "recurrent"
    growths = sum(1 for a, b in zip(raw, raw[1:]) if b / a > growth_factor)
    if growths >= 2:
        return "recurrent"
    level1 = [2 * b - a for a, b in zip(raw, raw[1:])]
    level2 = [(4 * b - a) / 3 for a, b in zip(level1, level1[1:])]
    integral = level2[-1]
    if integral < 1.0:
        integral = 1.0  # a Green sum is never below its n = 0 term
    point = 1.0 / integral
    err = abs(point - 1.0 / max(level1[-1], 1.0))
    return EstimateWithCI(point, err, 0, f"chung-fuchs(grid={sizes[-1]})")


# -- visits to a finite set ----------------------------------------------------------

def _hit_matrix(mu: ProbMeasure, targets: Sequence[Element],
                cfg: WalkConfig) -> np.ndarray:
    """hits[i, l-1] = 1 iff sample i is inside the target set at step l."""
    hits = np.zeros((cfg.samples, cfg.steps), dtype=bool)
    if not targets:
        return hits
    if isinstance(mu.group, LatticeGroup):
        vecs = _lattice_support(mu)
        tvecs = np.array([t.payload for t in targets], dtype=np.int64)
        for i in range(cfg.samples):
            pos = _lattice_positions(vecs, _increment_indices(mu, cfg, i))[1:]
            row = np.zeros(cfg.steps, dtype=bool)
            for t in tvecs:
                row |= np.all(pos == t, axis=1)
            hits[i] = row
    else:
        keys = {t.key for t in targets}
        elems, _ = mu.sampler()
        for i in range(cfg.samples):
            idx = _increment_indices(mu, cfg, i)
            w = mu.group.identity()
            for step, j in enumerate(idx):
                w = w * elems[j]
                if w.key in keys:
                    hits[i, step] = True
    return hits


def tail_visit_prob(mu: ProbMeasure, targets: Sequence[Element], n0: int,
                    cfg: WalkConfig) -> EstimateWithCI:
    """Monte Carlo estimate of P(some step in (n0, steps] lands in the set)."""
    if n0 >= cfg.steps:
        raise UsageError("tail_visit_prob needs n0 < steps")
    hits = _hit_matrix(mu, list(targets), cfg)
    ind = hits[:, n0:].any(axis=1)
    p = float(ind.mean())
    return EstimateWithCI(p, math.sqrt(p * (1 - p) / cfg.samples),
                          cfg.samples, f"tail-visit(n0={n0})")


@dataclass
class TailVisitProfile:
    entries: List[Tuple[int, EstimateWithCI]]
    gaps: List[EstimateWithCI]  # paired differences of consecutive entries


def tail_visit_profile(mu: ProbMeasure, targets: Sequence[Element],
                       n0_list: Sequence[int],
                       cfg: WalkConfig) -> TailVisitProfile:
    """Tail-visit probabilities over several n0 on one shared sample set.

    Sharing samples makes the estimates monotone nonincreasing in n0 by
    construction, and the per-pair gaps carry paired standard errors.
    """
    if any(n0 >= cfg.steps for n0 in n0_list):
        raise UsageError("tail_visit_profile needs every n0 < steps")
    hits = _hit_matrix(mu, list(targets), cfg)
    indicators = []
    entries = []
    for n0 in n0_list:
        ind = hits[:, n0:].any(axis=1).astype(float)
        indicators.append(ind)
        p = float(ind.mean())
        entries.append((n0, EstimateWithCI(
            p, math.sqrt(p * (1 - p) / cfg.samples), cfg.samples,
            f"tail-visit(n0={n0})")))
    gaps = []
    for a, b in zip(indicators, indicators[1:]):
        diff = a - b
        p = float(diff.mean())
        se = float(diff.std(ddof=1) / math.sqrt(cfg.samples)) \
            if cfg.samples > 1 else 0.0
        gaps.append(EstimateWithCI(p, se, cfg.samples, "tail-visit-gap"))
    return TailVisitProfile(entries, gaps)


@dataclass
class RangeRateProfile:
    entries: List[Tuple[int, EstimateWithCI]]
    gaps: List[EstimateWithCI]  # paired differences of consecutive horizons


def range_rate_profile(mu: ProbMeasure, cfg: WalkConfig,
                       steps_list: Sequence[int]) -> RangeRateProfile:
    """Range rates R_n/n at several horizons over one shared sample set.

    Each shorter horizon is a prefix of the same paths, so consecutive
    differences carry paired standard errors.
    """
    horizons = sorted(steps_list)
    if horizons[-1] != cfg.steps:
        raise UsageError("largest horizon must equal cfg.steps")
    rates = np.empty((cfg.samples, len(horizons)))
    if isinstance(mu.group, LatticeGroup):
        vecs = _lattice_support(mu)
        for i in range(cfg.samples):
            pos = _lattice_positions(vecs, _increment_indices(mu, cfg, i))
            for j, h in enumerate(horizons):
                rates[i, j] = _distinct_rows(pos[:h + 1]) / h
    else:
        elems, _ = mu.sampler()
        for i in range(cfg.samples):
            idx = _increment_indices(mu, cfg, i)
            w = mu.group.identity()
            seen = {w.key}
            marks = {h: 0 for h in horizons}
            for step, jj in enumerate(idx, start=1):
                w = w * elems[jj]
                seen.add(w.key)
                if step in marks:
                    marks[step] = len(seen)
            for j, h in enumerate(horizons):
                rates[i, j] = marks[h] / h
    entries = []
    for j, h in enumerate(horizons):
        col = rates[:, j]
        entries.append((h, EstimateWithCI(
            float(col.mean()),
            float(col.std(ddof=1) / math.sqrt(cfg.samples))
            if cfg.samples > 1 else 0.0,
            cfg.samples, f"range-rate(n={h})")))
    gaps = []
    for j in range(len(horizons) - 1):
        diff = rates[:, j] - rates[:, j + 1]
        gaps.append(EstimateWithCI(
            float(diff.mean()),
            float(diff.std(ddof=1) / math.sqrt(cfg.samples))
            if cfg.samples > 1 else 0.0,
            cfg.samples, "range-rate-gap"))
    return RangeRateProfile(entries, gaps)


def symmetry_certificate(mu: ProbMeasure, depth: int = 6) -> Optional[int]:
    """Smallest word length certifying that the support's semigroup closure
    contains every atom's inverse, or None if ``depth`` does not suffice."""
    support = mu.support()
    group = mu.group
    needed = {g.inverse().key for g in support}
    reached = {group.identity().key}
    frontier = [group.identity()]
    found_at = {}
    for level in range(1, depth + 1):
        nxt = []
        for x in frontier:
            for s in support:
                y = x * s
                if y.key not in reached:
                    reached.add(y.key)
                    nxt.append(y)
                    if y.key in needed and y.key not in found_at:
                        found_at[y.key] = level
        frontier = nxt
        if needed <= set(found_at):
            return max(found_at.values())
    return None
