"""Coarse-trajectory diagnostics for walks on wreath products.

Realizes, on concrete sampled or enumerated trajectories, the combinatorial
statistics whose entropies drive the wreath-product continuity argument:
coarse trajectories, the good/bad interval classification of increments,
coarse neighborhoods with the lamp split they induce, unstable points and
visits, and unstable increments.  Partition entropies are estimated by
plug-in sampling (with a Miller--Madow correction) or computed exactly by
weighted enumeration of all increment words.

Index conventions (fixed throughout):
  - a trajectory of length n has elements w_0..w_n and increments g_1..g_n;
  - interval j (1-based, j = 1..floor(n/t0)) covers instants
    (j-1)*t0 + 1 .. j*t0; the final partial interval covers the rest;
  - coarse positions are X_{j*t0} for j = 0, 1, ....
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .errors import ResourceError, UsageError
from .groups import Element, WreathGroup, closure_power
from .measures import ProbMeasure
from .rng import sample_stream
from .walks import Trajectory, WalkConfig, sample_path

STATISTICS = (
    "coarse_trajectory",
    "bad_increments",
    "lamps_out_coarse",
    "lamps_in_coarse",
    "unstable_points",
    "unstable_visits",
    "unstable_increments",
    "coarse_slices_wreath",
    "walk_endpoint",
)

# serialization tags; realizations are injective TLV byte strings
_T_GOOD = b"\x01"
_T_STAR = b"\x02"
_T_ELEM = b"\x10"
_T_INT = b"\x11"
_T_SEQ = b"\x12"


def _blob(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<I", len(payload)) + payload


def _ser_elem(e: Element) -> bytes:
    return _blob(_T_ELEM, e.key)


def _ser_int(i: int) -> bytes:
    return _T_INT + struct.pack("<q", i)


def _ser_seq(items: Sequence[bytes]) -> bytes:
    return _blob(_T_SEQ, b"".join(items))


@dataclass(frozen=True)
class CoarseSpec:
    """Parameter bundle for the coarse partitions.

    ``L`` is a finite set of lamp-group values containing the lamp identity;
    ``R`` a finite set of base-group moves containing the base identity;
    ``F`` the instability window, defaulting to R^t0 when omitted.
    """

    t0: int
    N: int
    n0: int
    L: Tuple[Element, ...]
    R: Tuple[Element, ...]
    F: Optional[Tuple[Element, ...]] = None

    def __post_init__(self):
        if self.t0 < 1 or self.N < 1 or self.n0 < 1:
            raise UsageError("CoarseSpec needs t0, N, n0 all >= 1")
        if not any(v.is_identity() for v in self.L):
            raise UsageError("L must contain the lamp identity")
        if not any(r.is_identity() for r in self.R):
            raise UsageError("R must contain the base identity")
        if self.F is not None and not any(f.is_identity() for f in self.F):
            raise UsageError("F must contain the base identity")

    def instability_window(self) -> Tuple[Element, ...]:
        """F, or its default R^t0."""
        if self.F is not None:
            return self.F
        return tuple(sorted(closure_power(self.R, self.t0),
                            key=lambda e: e.key))


# -- trajectory views -----------------------------------------------------------

def _wreath_group(traj: Trajectory) -> WreathGroup:
    group = traj.elements[0].group
    if not isinstance(group, WreathGroup):
        raise UsageError("this statistic needs a wreath-product trajectory")
    return group


def base_path(traj: Trajectory) -> List[Element]:
    """Base-group projection of a wreath trajectory."""
    group = _wreath_group(traj)
    return [group.project_to_base(w) for w in traj.elements]


def coarse_trajectory(traj_elements: Sequence[Element],
                      t0: int) -> Tuple[Element, ...]:
    """(w_{t0}, w_{2 t0}, ..., w_{floor(n/t0) t0}); empty when n < t0."""
    if t0 < 1:
        raise UsageError("coarse stride t0 must be >= 1")
    n = len(traj_elements) - 1
    return tuple(traj_elements[j * t0] for j in range(1, n // t0 + 1))


@dataclass
class IncrementClassification:
    """Realization of the bad-increment partition.

    ``blocks[j-1]`` is None when interval j is good (all its increments lie
    in the allowed (L, R) shape) and the verbatim increment tuple otherwise;
    ``final`` always holds the trailing partial interval verbatim.
    """

    blocks: Tuple[Optional[Tuple[Element, ...]], ...]
    final: Tuple[Element, ...]

    def serialize(self) -> bytes:
        parts = []
        for block in self.blocks:
            if block is None:
                parts.append(_T_GOOD)
            else:
                parts.append(_ser_seq([_ser_elem(g) for g in block]))
        parts.append(_ser_seq([_ser_elem(g) for g in self.final]))
        return _ser_seq(parts)


def _is_good_increment(g: Element, group: WreathGroup,
                       lamp_keys: FrozenSet[bytes],
                       base_keys: FrozenSet[bytes]) -> bool:
    lamps, pos = g.payload
    if pos.key not in base_keys:
        return False
    for b, v in lamps:
        if b.key not in base_keys or v.key not in lamp_keys:
            return False
    return True


def classify_increments(traj: Trajectory,
                        spec: CoarseSpec) -> IncrementClassification:
    """Good/bad classification of the length-t0 increment intervals."""
    group = _wreath_group(traj)
    lamp_keys = frozenset(v.key for v in spec.L)
    base_keys = frozenset(r.key for r in spec.R)
    n = len(traj.increments)
    t0 = spec.t0
    blocks = []
    for j in range(1, n // t0 + 1):
        window = tuple(traj.increments[(j - 1) * t0: j * t0])
        good = all(_is_good_increment(g, group, lamp_keys, base_keys)
                   for g in window)
        blocks.append(None if good else window)
    final = tuple(traj.increments[(n // t0) * t0:])
    return IncrementClassification(tuple(blocks), final)


def coarse_neighborhood(base_traj: Sequence[Element],
                        spec: CoarseSpec,
                        budget: int = 10_000_000) -> FrozenSet[Element]:
    """Union of the R^t0 translates of the coarse base positions.

    Covers exactly the positions where good-interval lamp changes can live:
    translates at coarse indices j = 0 .. floor(n/t0) - 1.
    """
    n = len(base_traj) - 1
    if n < spec.t0:
        raise UsageError("coarse_neighborhood needs a path of length >= t0")
    window = closure_power(spec.R, spec.t0, budget=budget)
    out = set()
    for j in range(n // spec.t0):
        x = base_traj[j * spec.t0]
        for r in window:
            out.add(x * r)
    return frozenset(out)


LampMap = Tuple[Tuple[Element, Element], ...]


def lamp_split(state: Element,
               neighborhood: FrozenSet[Element]) -> Tuple[LampMap, LampMap]:
    """Restrict the lamp map to the neighborhood and to its complement.

    The two parts partition the support, so merging them reassembles the
    configuration exactly.
    """
    group = state.group
    if not isinstance(group, WreathGroup):
        raise UsageError("lamp_split needs a wreath-product element")
    keys = {b.key for b in neighborhood}
    inside, outside = [], []
    for b, v in state.payload[0]:
        (inside if b.key in keys else outside).append((b, v))
    return tuple(inside), tuple(outside)


def _ser_lampmap(part: LampMap) -> bytes:
    return _ser_seq([_ser_seq([_ser_elem(b), _ser_elem(v)])
                     for b, v in part])


# -- unstable structure ------------------------------------------------------------

def _translate_sets(base_traj: Sequence[Element], spec: CoarseSpec,
                    count: int) -> List[List[Element]]:
    window = spec.instability_window()
    return [[base_traj[j * spec.t0] * f for f in window]
            for j in range(count + 1)]


def unstable_points(base_traj: Sequence[Element],
                    spec: CoarseSpec) -> FrozenSet[Element]:
    """Base points covered by translated F-windows at two coarse times more
    than n0 apart."""
    n = len(base_traj) - 1
    if n <= spec.n0 * spec.t0:
        raise UsageError("unstable_points needs n > n0 * t0")
    s = n // spec.t0
    sets = _translate_sets(base_traj, spec, s)
    first_last: Dict[bytes, Tuple[int, int, Element]] = {}
    for j, elems in enumerate(sets):
        for b in elems:
            k = b.key
            if k in first_last:
                f, _, e = first_last[k]
                first_last[k] = (f, j, e)
            else:
                first_last[k] = (j, j, b)
    # a point is unstable iff its coarse visit indices span a gap > n0
    return frozenset(e for f, l, e in first_last.values() if l - f > spec.n0)


def unstable_visits(base_traj: Sequence[Element],
                    spec: CoarseSpec) -> FrozenSet[int]:
    """Coarse indices j <= floor(n/t0) - n0 whose F-window meets an
    unstable point."""
    n = len(base_traj) - 1
    unstable = unstable_points(base_traj, spec)
    keys = {b.key for b in unstable}
    s = n // spec.t0
    sets = _translate_sets(base_traj, spec, s)
    return frozenset(j for j in range(s - spec.n0 + 1)
                     if any(b.key in keys for b in sets[j]))


def unstable_increments(traj: Trajectory, spec: CoarseSpec,
                        unstable: FrozenSet[Element]) -> Dict[Tuple[Element, int], object]:
    """Per (unstable point, interval) lamp increment.

    On a good interval j the value is the lamp-group increment accumulated
    at the point between instants (j-1) t0 and j t0; on bad intervals the
    placeholder "*" stands in (their contents are already recorded
    verbatim by the bad-increment partition).
    """
    group = _wreath_group(traj)
    lamp_group = group.lamp_group
    n = len(traj.increments)
    cls = classify_increments(traj, spec)
    out: Dict[Tuple[Element, int], object] = {}
    points = sorted(unstable, key=lambda b: b.key)
    for j in range(1, n // spec.t0 + 1):
        good = cls.blocks[j - 1] is None
        before = group.lamp_map(traj.elements[(j - 1) * spec.t0])
        after = group.lamp_map(traj.elements[j * spec.t0])
        for b in points:
            if not good:
                out[(b, j)] = "*"
                continue
            vb = before.get(b, lamp_group.identity())
            va = after.get(b, lamp_group.identity())
            out[(b, j)] = vb.inverse() * va
    return out


def _ser_unstable_increments(delta: Dict[Tuple[Element, int], object]) -> bytes:
    items = sorted(delta.items(), key=lambda kv: (kv[0][0].key, kv[0][1]))
    parts = []
    for (b, j), v in items:
        payload = _T_STAR if v == "*" else _ser_elem(v)
        parts.append(_ser_seq([_ser_elem(b), _ser_int(j), payload]))
    return _ser_seq(parts)


# -- statistic realizations ----------------------------------------------------------

def realize_statistic(name: str, traj: Trajectory, spec: CoarseSpec) -> bytes:
    """Serialized realization of one named statistic on one trajectory.

    Serializations are injective: two trajectories produce equal bytes
    exactly when the statistic takes the same value on them.
    """
    if name == "coarse_trajectory":
        group = traj.elements[0].group
        elems = (base_path(traj) if isinstance(group, WreathGroup)
                 else list(traj.elements))
        return _ser_seq([_ser_elem(w)
                         for w in coarse_trajectory(elems, spec.t0)])
    if name == "coarse_slices_wreath":
        _wreath_group(traj)
        stride = spec.N * spec.t0
        return _ser_seq([_ser_elem(w)
                         for w in coarse_trajectory(traj.elements, stride)])
    if name == "bad_increments":
        return classify_increments(traj, spec).serialize()
    if name in ("lamps_in_coarse", "lamps_out_coarse"):
        group = _wreath_group(traj)
        bp = base_path(traj)
        n = len(traj.increments)
        stride = spec.N * spec.t0
        parts = []
        for ell in range(1, n // stride + 1):
            m = ell * stride
            hood = coarse_neighborhood(bp[:m + 1], spec)
            inside, outside = lamp_split(traj.elements[m], hood)
            parts.append(_ser_lampmap(
                inside if name == "lamps_in_coarse" else outside))
        return _ser_seq(parts)
    if name == "unstable_points":
        pts = unstable_points(base_path(traj), spec)
        return _ser_seq([_ser_elem(b)
                         for b in sorted(pts, key=lambda e: e.key)])
    if name == "unstable_visits":
        visits = unstable_visits(base_path(traj), spec)
        return _ser_seq([_ser_int(j) for j in sorted(visits)])
    if name == "unstable_increments":
        pts = unstable_points(base_path(traj), spec)
        return _ser_unstable_increments(unstable_increments(traj, spec, pts))
    if name == "walk_endpoint":
        return _ser_elem(traj.elements[-1])
    raise UsageError(f"unknown statistic {name!r}; choose from {STATISTICS}")


# -- entropy estimation ---------------------------------------------------------------

@dataclass
class EntropyEstimate:
    point: float
    method: str  # plug-in | plug-in+miller-madow | exact-enumeration
    samples: int
    bias_note: str
    miller_madow: Optional[float] = None
    low_confidence: bool = False


def _entropy_of_counts(counts: Dict[bytes, float], total: float) -> float:
    h = 0.0
    for c in counts.values():
        p = c / total
        if p > 0.0:
            h -= p * math.log(p)
    return h


def plugin_partition_entropy(mu: ProbMeasure, statistic: str, n: int,
                             spec: CoarseSpec,
                             cfg: WalkConfig) -> EntropyEstimate:
    """Plug-in entropy of a statistic over independent sampled trajectories.

    Reports the raw plug-in value (biased low) and the Miller--Madow
    corrected variant; flags low confidence when the realization support
    is visibly unsaturated (more than 90% singleton realizations).
    """
    if cfg.samples < 100:
        raise UsageError("plug-in estimation needs at least 100 samples")
    path_cfg = WalkConfig(steps=n, samples=cfg.samples,
                          master_seed=cfg.master_seed)
    counts: Dict[bytes, int] = {}
    for i in range(cfg.samples):
        traj = sample_path(mu, path_cfg, i)
        r = realize_statistic(statistic, traj, spec)
        counts[r] = counts.get(r, 0) + 1
    total = float(cfg.samples)
    plug = _entropy_of_counts(counts, total)
    support = len(counts)
    mm = plug + (support - 1) / (2.0 * total)
    singletons = sum(1 for c in counts.values() if c == 1)
    return EntropyEstimate(
        point=plug,
        method="plug-in",
        samples=cfg.samples,
        bias_note="plug-in underestimates; Miller-Madow adds (m-1)/(2N)",
        miller_madow=mm,
        low_confidence=singletons > 0.9 * total,
    )


def _enumerate_trajectories(mu: ProbMeasure, n: int, budget: int):
    """Yield (trajectory, probability) over all length-n increment words."""
    pairs = mu.atoms()
    if len(pairs) ** n > budget:
        raise ResourceError(
            f"enumeration needs {len(pairs) ** n} weighted words, "
            f"budget is {budget}")
    group = mu.group
    identity = group.identity()
    for word in itertools.product(range(len(pairs)), repeat=n):
        prob = 1.0
        elems = [identity]
        increments = []
        for i in word:
            g, m = pairs[i]
            prob *= m
            increments.append(g)
            elems.append(elems[-1] * g)
        yield Trajectory(elems, increments, "enumeration"), prob


def exact_joint_law(mu: ProbMeasure, statistics: Sequence[str], n: int,
                    spec: CoarseSpec,
                    budget: int = 20_000_000) -> Dict[Tuple[bytes, ...], float]:
    """Exact joint distribution of several statistics by full enumeration."""
    law: Dict[Tuple[bytes, ...], float] = {}
    for traj, prob in _enumerate_trajectories(mu, n, budget):
        key = tuple(realize_statistic(s, traj, spec) for s in statistics)
        law[key] = law.get(key, 0.0) + prob
    return law


def _entropy_of_law(law: Dict, total: float = 1.0) -> float:
    return _entropy_of_counts(law, total)


def exact_partition_entropy(mu: ProbMeasure, statistic: str, n: int,
                            spec: CoarseSpec,
                            budget: int = 20_000_000) -> EntropyEstimate:
    """Exact entropy of one statistic via weighted word enumeration."""
    law = exact_joint_law(mu, [statistic], n, spec, budget)
    support = len(mu.atoms())
    return EntropyEstimate(
        point=_entropy_of_law(law),
        method="exact-enumeration",
        samples=support ** n,
        bias_note="exact",
    )


def exact_conditional_entropy(mu: ProbMeasure, target: Sequence[str],
                              given: Sequence[str], n: int, spec: CoarseSpec,
                              budget: int = 20_000_000) -> float:
    """H(target | given) from the exact joint law: H(T v G) - H(G).

    Conditional entropies are only ever computed on exact enumerations;
    plug-in conditionals are too biased at desk sample sizes to report.
    """
    joint = exact_joint_law(mu, list(target) + list(given), n, spec, budget)
    marginal: Dict[Tuple[bytes, ...], float] = {}
    k = len(target)
    for key, p in joint.items():
        gkey = key[k:]
        marginal[gkey] = marginal.get(gkey, 0.0) + p
    return _entropy_of_law(joint) - _entropy_of_law(marginal)
