"""Finitely supported probability measures on a group.

Two internal layouts share one interface: a generic sparse map keyed by
canonical element keys, and a dense box layout for integer-lattice groups
(where convolution powers can reach millions of sites and vectorized
shifted adds are the only way to stay fast).  Construction picks the layout
from the group kind; callers never see the difference.

Truncation is always explicit: discarded probability accumulates in
``mass_deficit`` and is surfaced by every downstream report.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ResourceError, UsageError, ValidationError
from .groups import (Element, GroupHandle, GroupSpec, LatticeGroup,
                     WreathGroup, make_group)

MASS_TOLERANCE = 1e-9
DEFAULT_BUDGET = 20_000_000


@dataclass(frozen=True)
class TruncationPolicy:
    """How convolution results may shed low-mass atoms."""

    mode: str = "exact"  # exact | mass-threshold | support-cap
    epsilon: float = 0.0
    max_atoms: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "mass-threshold", "support-cap"):
            raise ConfigurationError(f"unknown truncation mode {self.mode!r}")
        if self.mode == "mass-threshold" and not 0.0 <= self.epsilon <= 1e-3:
            raise ConfigurationError(
                f"mass threshold must lie in [0, 1e-3], got {self.epsilon}")
        if self.mode == "support-cap" and self.max_atoms < 1:
            raise ConfigurationError("support cap needs max_atoms >= 1")

    @staticmethod
    def exact() -> "TruncationPolicy":
        return TruncationPolicy("exact")

    @staticmethod
    def mass_threshold(epsilon: float) -> "TruncationPolicy":
        return TruncationPolicy("mass-threshold", epsilon=epsilon)

    @staticmethod
    def support_cap(max_atoms: int) -> "TruncationPolicy":
        return TruncationPolicy("support-cap", max_atoms=max_atoms)


EXACT = TruncationPolicy.exact()


class ProbMeasure:
    """Immutable finitely supported probability measure."""

    __slots__ = ("group", "mass_deficit", "_atoms", "_lo", "_box", "_sampler")

    def __init__(self, group: GroupHandle, *, atoms=None, lo=None, box=None,
                 mass_deficit: float = 0.0):
        self.group = group
        self.mass_deficit = mass_deficit
        self._atoms = atoms          # dict key -> (Element, mass)
        self._lo = lo                # int64 vector for the dense layout
        self._box = box              # float64 d-dim array
        self._sampler = None

    # -- basic accessors -----------------------------------------------------
    @property
    def is_dense(self) -> bool:
        return self._box is not None

    @property
    def support_size(self) -> int:
        if self.is_dense:
            return int(np.count_nonzero(self._box))
        return len(self._atoms)

    @property
    def total_mass(self) -> float:
        if self.is_dense:
            return float(self._box.sum())
        return float(sum(m for _, m in self._atoms.values()))

    def mass_of(self, g: Element) -> float:
        if self.is_dense:
            idx = np.asarray(g.payload, dtype=np.int64) - self._lo
            if np.any(idx < 0) or np.any(idx >= self._box.shape):
                return 0.0
            return float(self._box[tuple(idx)])
        entry = self._atoms.get(g.key)
        return entry[1] if entry is not None else 0.0

    def atoms(self) -> List[Tuple[Element, float]]:
        """Support atoms with masses, sorted by canonical key."""
        if self.is_dense:
            coords = np.argwhere(self._box != 0.0)
            pairs = []
            for c in coords:
                vec = tuple(int(x) for x in (self._lo + c))
                pairs.append((self.group.element(vec),
                              float(self._box[tuple(c)])))
            pairs.sort(key=lambda em: em[0].key)
            return pairs
        return sorted(self._atoms.values(), key=lambda em: em[0].key)

    def support(self) -> List[Element]:
        return [g for g, _ in self.atoms()]

    def sampler(self):
        """(elements, cdf) with atoms in canonical-key order, for inverse-CDF
        sampling; cached."""
        if self._sampler is None:
            pairs = self.atoms()
            elems = [g for g, _ in pairs]
            cdf = np.cumsum(np.array([m for _, m in pairs]))
            cdf[-1] = max(cdf[-1], 1.0)  # guard the final bin against rounding
            self._sampler = (elems, cdf)
        return self._sampler

    def __repr__(self) -> str:
        return (f"<ProbMeasure on {self.group.spec.kind}: "
                f"{self.support_size} atoms, deficit={self.mass_deficit:g}>")


# -- construction -------------------------------------------------------------

def make_measure(group: GroupHandle,
                 pairs: Iterable[Tuple[Element, float]]) -> ProbMeasure:
    """Build a measure from (element, mass) pairs.

    Duplicates merge by summation, zero-mass atoms drop, and the total must
    sit within 1e-9 of 1, after which it is normalized to exactly 1.
    """
    merged = {}
    for g, m in pairs:
        if not isinstance(g, Element):
            g = group.element(g)
        if g.group is not group:
            raise UsageError("all atoms must belong to the target group")
        m = float(m)
        if m < 0:
            raise ValidationError(f"negative mass {m} on atom {g!r}")
        if g.key in merged:
            merged[g.key] = (merged[g.key][0], merged[g.key][1] + m)
        else:
            merged[g.key] = (g, m)
    merged = {k: gm for k, gm in merged.items() if gm[1] > 0.0}
    if not merged:
        raise ValidationError("measure has empty support")
    total = sum(m for _, m in merged.values())
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise ValidationError(
            f"total mass {total!r} outside [1-1e-9, 1+1e-9]")
    merged = {k: (g, m / total) for k, (g, m) in merged.items()}
    if isinstance(group, LatticeGroup):
        return _dense_from_pairs(group, list(merged.values()))
    return ProbMeasure(group, atoms=merged)


def _dense_from_pairs(group: LatticeGroup, pairs) -> ProbMeasure:
    coords = np.array([g.payload for g, _ in pairs], dtype=np.int64)
    masses = np.array([m for _, m in pairs])
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    box = np.zeros(tuple(hi - lo + 1))
    np.add.at(box, tuple((coords - lo).T), masses)
    return ProbMeasure(group, lo=lo, box=box)


def delta(group: GroupHandle, g: Optional[Element] = None) -> ProbMeasure:
    """Point mass at ``g`` (defaults to the identity)."""
    return make_measure(group, [(g if g is not None else group.identity(), 1.0)])


# -- truncation ---------------------------------------------------------------

def _truncate_dense(lo, box, policy: TruncationPolicy):
    discarded = 0.0
    if policy.mode == "mass-threshold" and policy.epsilon > 0:
        small = (box != 0.0) & (box < policy.epsilon)
        discarded = float(box[small].sum())
        box = np.where(small, 0.0, box)
    elif policy.mode == "support-cap":
        nz = box[box != 0.0]
        if nz.size > policy.max_atoms:
            cut = np.partition(nz, nz.size - policy.max_atoms)[
                nz.size - policy.max_atoms]
            keep = box >= cut
            # ties at the cut value: keep just enough, in C order
            excess = int(keep.sum()) - policy.max_atoms
            if excess > 0:
                tie_idx = np.argwhere((box == cut))
                for idx in tie_idx[::-1]:
                    if excess == 0:
                        break
                    keep[tuple(idx)] = False
                    excess -= 1
            discarded = float(box[~keep & (box != 0.0)].sum())
            box = np.where(keep, box, 0.0)
    if discarded > 0.0:
        nz = np.nonzero(box)
        if nz[0].size:
            lo_off = np.array([int(ix.min()) for ix in nz])
            hi_off = np.array([int(ix.max()) for ix in nz])
            box = box[tuple(slice(a, b + 1) for a, b in zip(lo_off, hi_off))]
            lo = lo + lo_off
    return lo, box, discarded


def _truncate_sparse(atoms: dict, policy: TruncationPolicy):
    if policy.mode == "mass-threshold" and policy.epsilon > 0:
        keep, discarded = {}, 0.0
        for k, (g, m) in atoms.items():
            if m < policy.epsilon:
                discarded += m
            else:
                keep[k] = (g, m)
        return keep, discarded
    if policy.mode == "support-cap" and len(atoms) > policy.max_atoms:
        ranked = sorted(atoms.items(), key=lambda kv: (-kv[1][1], kv[0]))
        keep = dict(ranked[:policy.max_atoms])
        discarded = sum(m for _, (_, m) in ranked[policy.max_atoms:])
        return keep, discarded
    return atoms, 0.0


# -- core operations -----------------------------------------------------------

def convolve(mu: ProbMeasure, nu: ProbMeasure,
             policy: TruncationPolicy = EXACT,
             budget: int = DEFAULT_BUDGET) -> ProbMeasure:
    """Exact convolution over the finite supports, then truncation by policy."""
    if mu.group is not nu.group:
        raise UsageError("convolution operands live on different groups")
    deficit = mu.mass_deficit + nu.mass_deficit
    if mu.is_dense:
        lo, box, discarded = _convolve_dense(mu, nu, policy, budget)
        return ProbMeasure(mu.group, lo=lo, box=box,
                           mass_deficit=min(1.0, deficit + discarded))
    out = {}
    left = mu.atoms()
    right = nu.atoms()
    if len(left) * len(right) > budget:
        raise ResourceError(
            f"convolution would form {len(left) * len(right)} products, "
            f"budget is {budget}")
    for g, m1 in left:
        for h, m2 in right:
            gh = g * h
            k = gh.key
            entry = out.get(k)
            if entry is None:
                out[k] = (gh, m1 * m2)
            else:
                out[k] = (entry[0], entry[1] + m1 * m2)
    out, discarded = _truncate_sparse(out, policy)
    if policy.mode == "exact" and len(out) > budget:
        raise ResourceError(
            f"exact convolution support {len(out)} exceeds budget {budget}")
    return ProbMeasure(mu.group, atoms=out,
                       mass_deficit=min(1.0, deficit + discarded))


def _convolve_dense(mu: ProbMeasure, nu: ProbMeasure,
                    policy: TruncationPolicy, budget: int):
    # iterate the smaller support as the shift set
    small, big = (nu, mu) if nu.support_size <= mu.support_size else (mu, nu)
    vecs = np.argwhere(small._box != 0.0) + small._lo
    masses = np.array([small._box[tuple(c - small._lo)] for c in vecs])
    if nu.support_size > mu.support_size:
        # convolution on an abelian lattice commutes, so the swap is safe
        pass
    mins = vecs.min(axis=0)
    maxs = vecs.max(axis=0)
    lo = big._lo + mins
    shape = tuple(np.asarray(big._box.shape) + (maxs - mins))
    if int(np.prod(shape)) > budget:
        raise ResourceError(
            f"dense convolution box {shape} exceeds budget {budget}")
    box = np.zeros(shape)
    inner = big._box.shape
    for v, m in zip(vecs, masses):
        off = v - mins
        sl = tuple(slice(int(o), int(o) + s) for o, s in zip(off, inner))
        box[sl] += m * big._box
    lo, box, discarded = _truncate_dense(lo, box, policy)
    return lo, box, discarded


def convolve_power(mu: ProbMeasure, n: int,
                   policy: TruncationPolicy = EXACT,
                   budget: int = DEFAULT_BUDGET) -> ProbMeasure:
    """n-fold convolution power by a fixed left fold; n = 0 gives the point
    mass at the identity."""
    if n < 0:
        raise UsageError(f"convolution power must be >= 0, got {n}")
    acc = delta(mu.group)
    for _ in range(n):
        acc = convolve(acc, mu, policy, budget)
    return acc


def reflect(mu: ProbMeasure) -> ProbMeasure:
    """The reflected measure g -> mu(g^{-1})."""
    if mu.is_dense:
        box = mu._box[tuple(slice(None, None, -1) for _ in mu._box.shape)]
        lo = -(mu._lo + np.asarray(mu._box.shape) - 1)
        return ProbMeasure(mu.group, lo=lo, box=box.copy(),
                           mass_deficit=mu.mass_deficit)
    out = {}
    for g, m in mu._atoms.values():
        gi = g.inverse()
        out[gi.key] = (gi, m)
    return ProbMeasure(mu.group, atoms=out, mass_deficit=mu.mass_deficit)


def is_symmetric(mu: ProbMeasure, tol: float = 1e-12) -> bool:
    return tv_distance(mu, reflect(mu)) <= tol


def shannon_entropy(mu: ProbMeasure) -> float:
    """-sum m ln m over atoms, in nats; the mass deficit is excluded (the
    measure's ``mass_deficit`` field is the uncertainty flag)."""
    if mu.is_dense:
        nz = mu._box[mu._box != 0.0]
        return float(-(nz * np.log(nz)).sum())
    masses = np.array([m for _, m in mu.atoms()])
    return float(-(masses * np.log(masses)).sum())


def tv_distance(mu: ProbMeasure, nu: ProbMeasure) -> float:
    """Total variation in the l1 convention: sum |mu(g) - nu(g)| in [0, 2]."""
    if mu.group is not nu.group:
        raise UsageError("tv_distance operands live on different groups")
    if mu.is_dense and nu.is_dense:
        lo = np.minimum(mu._lo, nu._lo)
        hi = np.maximum(mu._lo + np.asarray(mu._box.shape),
                        nu._lo + np.asarray(nu._box.shape))
        acc = np.zeros(tuple(hi - lo))
        sl_mu = tuple(slice(int(a), int(a) + s)
                      for a, s in zip(mu._lo - lo, mu._box.shape))
        sl_nu = tuple(slice(int(a), int(a) + s)
                      for a, s in zip(nu._lo - lo, nu._box.shape))
        acc[sl_mu] += mu._box
        acc[sl_nu] -= nu._box
        return float(np.abs(acc).sum())
    a = {k: m for k, (_, m) in _as_sparse(mu).items()}
    b = {k: m for k, (_, m) in _as_sparse(nu).items()}
    keys = sorted(set(a) | set(b))
    return float(sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys))


def _as_sparse(mu: ProbMeasure) -> dict:
    if not mu.is_dense:
        return mu._atoms
    return {g.key: (g, m) for g, m in mu.atoms()}


def pushforward(mu: ProbMeasure, kind: str = "base-projection") -> ProbMeasure:
    """Image of the measure under the projection to the base group."""
    if kind != "base-projection":
        raise UsageError(f"unknown pushforward kind {kind!r}")
    if not isinstance(mu.group, WreathGroup):
        raise UsageError("base-projection pushforward needs a wreath measure")
    base = mu.group.base_group
    merged = {}
    for g, m in mu.atoms():
        b = mu.group.project_to_base(g)
        if b.key in merged:
            merged[b.key] = (merged[b.key][0], merged[b.key][1] + m)
        else:
            merged[b.key] = (b, m)
    if isinstance(base, LatticeGroup):
        out = _dense_from_pairs(base, list(merged.values()))
        return ProbMeasure(base, lo=out._lo, box=out._box,
                           mass_deficit=mu.mass_deficit)
    return ProbMeasure(base, atoms=merged, mass_deficit=mu.mass_deficit)


def entropy_tail(mu: ProbMeasure, outside: Iterable[Element]) -> float:
    """Entropy contribution -m ln m of atoms outside the given finite set."""
    keys = {g.key for g in outside}
    total = 0.0
    for g, m in mu.atoms():
        if g.key not in keys:
            total -= m * np.log(m)
    return float(total)


# -- families -------------------------------------------------------------------

@dataclass
class MeasureFamily:
    """A limit measure together with an indexed sequence k -> measure."""

    limit: ProbMeasure
    member: Callable[[int], ProbMeasure]
    description: str = ""

    def __call__(self, k: int) -> ProbMeasure:
        if k < 1:
            raise UsageError("family index must be >= 1")
        return self.member(k)


def mixture_family(limit: ProbMeasure, contaminant: Element,
                   weight: Callable[[int], float] = lambda k: 1.0 / k,
                   description: str = "mixture") -> MeasureFamily:
    """mu_k = (1 - w(k)) mu + w(k) delta_contaminant."""

    def member(k: int) -> ProbMeasure:
        w = weight(k)
        pairs = [(g, (1.0 - w) * m) for g, m in limit.atoms()]
        pairs.append((contaminant, w))
        return make_measure(limit.group, pairs)

    return MeasureFamily(limit, member, description)


def heavy_tail_family(group: GroupHandle, exponent: float = 1.5,
                      proxy_k: int = 4096) -> MeasureFamily:
    """Renormalized restrictions of m -> (1+|m|)^-exponent on Z to [-k, k].

    The infinitely supported limit law is represented by its ``proxy_k``
    truncation; members with small k are recurrent walks while the limit
    law is transient, which is the discontinuity substrate the demo runs on.
    """
    if not isinstance(group, LatticeGroup) or group.d != 1:
        raise UsageError("heavy-tail family is defined on the 1d lattice")

    def member(k: int) -> ProbMeasure:
        ms = np.arange(-k, k + 1)
        w = (1.0 + np.abs(ms)) ** (-exponent)
        pairs = [(group.element((int(m),)), float(x)) for m, x in zip(ms, w / w.sum())]
        return make_measure(group, pairs)

    return MeasureFamily(member(proxy_k), member,
                         f"heavy-tail exponent {exponent}")


@dataclass
class ConvergenceRow:
    k: int
    tv_step: float
    tv_power: float
    d_entropy_step: float
    d_entropy_power: float
    deficit: float
    deficit_flagged: bool
    tail_entropy: Optional[float] = None


def convergence_report(family: MeasureFamily, k_max: int, n: int,
                       policy: TruncationPolicy = EXACT,
                       tail_set: Optional[Sequence[Element]] = None,
                       deficit_tolerance: float = 1e-6) -> List[ConvergenceRow]:
    """Per-k distances and entropy gaps against the family limit.

    With ``tail_set`` given, the entropy tail outside that set is included
    per row; this is the bounded-k tightness diagnostic (the infinite
    sequence cannot be certified from finitely many members).
    """
    if k_max < 1 or n < 1:
        raise UsageError("convergence_report needs k_max >= 1 and n >= 1")
    mu = family.limit
    mu_n = convolve_power(mu, n, policy)
    h1, hn = shannon_entropy(mu), shannon_entropy(mu_n)
    rows = []
    for k in range(1, k_max + 1):
        mk = family(k)
        mk_n = convolve_power(mk, n, policy)
        deficit = max(mk.mass_deficit, mk_n.mass_deficit, mu_n.mass_deficit)
        rows.append(ConvergenceRow(
            k=k,
            tv_step=tv_distance(mk, mu),
            tv_power=tv_distance(mk_n, mu_n),
            d_entropy_step=abs(shannon_entropy(mk) - h1),
            d_entropy_power=abs(shannon_entropy(mk_n) - hn),
            deficit=deficit,
            deficit_flagged=deficit > deficit_tolerance,
            tail_entropy=(entropy_tail(mk, tail_set)
                          if tail_set is not None else None),
        ))
    return rows


# -- text serialization -----------------------------------------------------------

FORMAT_HEADER = "# groupwalks-measure v1"


def dumps_measure(mu: ProbMeasure) -> str:
    """One atom per line: canonical key in hex plus shortest round-trip mass."""
    lines = [FORMAT_HEADER,
             f"# group: {json.dumps(mu.group.spec.to_dict(), sort_keys=True)}",
             f"# mass_deficit: {mu.mass_deficit!r}"]
    for g, m in mu.atoms():
        lines.append(f"{g.key.hex()} {m!r}")
    return "\n".join(lines) + "\n"


def loads_measure(text: str) -> ProbMeasure:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValidationError("not a groupwalks measure file")
    spec = GroupSpec.from_dict(json.loads(lines[1].split(":", 1)[1]))
    deficit = float(lines[2].split(":", 1)[1])
    group = make_group(spec)
    pairs = []
    for ln in lines[3:]:
        key_hex, mass = ln.split()
        pairs.append((group.decode_key(bytes.fromhex(key_hex)), float(mass)))
    total = sum(m for _, m in pairs)
    mu = make_measure(group, [(g, m / total) for g, m in pairs])
    if deficit > 0.0:
        if mu.is_dense:
            return ProbMeasure(group, lo=mu._lo, box=mu._box * (1 - deficit),
                               mass_deficit=deficit)
        atoms = {k: (g, m * (1 - deficit)) for k, (g, m) in mu._atoms.items()}
        return ProbMeasure(group, atoms=atoms, mass_deficit=deficit)
    return mu


def save_measure(mu: ProbMeasure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_measure(mu))


def load_measure(path) -> ProbMeasure:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_measure(fh.read())
