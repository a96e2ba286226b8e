"""Concrete countable groups with a canonical byte encoding per element.

Supported kinds: integer lattices Z^d, finite cyclic groups, the infinite
dihedral group (as Z semidirect Z/2), free groups of finite rank, and wreath
products lamp-group-wr-base-group built over any of the other kinds
(nesting allowed).

Every element owns a canonical byte key: a one-byte kind tag followed by a
length-prefixed little-endian payload, with the identity of every group
encoded as the bare tag.  Keys are injective within a group, deterministic,
and platform independent, so they double as dictionary keys for measures and
visited-set logic.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import ConfigurationError, ResourceError, UsageError

KIND_LATTICE = "integer-lattice"
KIND_CYCLIC = "cyclic"
KIND_DIHEDRAL = "infinite-dihedral"
KIND_FREE = "free"
KIND_WREATH = "wreath"

_TAGS = {
    KIND_LATTICE: b"Z",
    KIND_CYCLIC: b"C",
    KIND_DIHEDRAL: b"D",
    KIND_FREE: b"F",
    KIND_WREATH: b"W",
}

GrowthDegree = Union[int, str, None]


@dataclass(frozen=True)
class GroupSpec:
    """Declarative description of a group, suitable for config files."""

    kind: str
    d: Optional[int] = None
    m: Optional[int] = None
    rank: Optional[int] = None
    lamp: Optional["GroupSpec"] = None
    base: Optional["GroupSpec"] = None
    declared_growth_degree: GrowthDegree = None

    # -- constructors -----------------------------------------------------
    @staticmethod
    def lattice(d: int, growth: GrowthDegree = None) -> "GroupSpec":
        return GroupSpec(KIND_LATTICE, d=d, declared_growth_degree=growth)

    @staticmethod
    def cyclic(m: int, growth: GrowthDegree = None) -> "GroupSpec":
        return GroupSpec(KIND_CYCLIC, m=m, declared_growth_degree=growth)

    @staticmethod
    def dihedral(growth: GrowthDegree = None) -> "GroupSpec":
        return GroupSpec(KIND_DIHEDRAL, declared_growth_degree=growth)

    @staticmethod
    def free(rank: int, growth: GrowthDegree = None) -> "GroupSpec":
        return GroupSpec(KIND_FREE, rank=rank, declared_growth_degree=growth)

    @staticmethod
    def wreath(lamp: "GroupSpec", base: "GroupSpec",
               growth: GrowthDegree = None) -> "GroupSpec":
        return GroupSpec(KIND_WREATH, lamp=lamp, base=base,
                         declared_growth_degree=growth)

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        if self.kind == KIND_LATTICE:
            if not isinstance(self.d, int) or self.d < 1:
                raise ConfigurationError(
                    f"integer-lattice needs d >= 1, got d={self.d!r}")
        elif self.kind == KIND_CYCLIC:
            if not isinstance(self.m, int) or self.m < 1:
                raise ConfigurationError(
                    f"cyclic needs m >= 1, got m={self.m!r}")
        elif self.kind == KIND_DIHEDRAL:
            pass
        elif self.kind == KIND_FREE:
            if not isinstance(self.rank, int) or self.rank < 1:
                raise ConfigurationError(
                    f"free needs rank >= 1, got rank={self.rank!r}")
        elif self.kind == KIND_WREATH:
            if self.lamp is None or self.base is None:
                raise ConfigurationError(
                    "wreath needs both a lamp spec and a base spec")
            self.lamp.validate()
            self.base.validate()
        else:
            raise ConfigurationError(f"unknown group kind {self.kind!r}")
        self._validate_growth()

    def _valid_growth_values(self):
        if self.kind == KIND_LATTICE:
            return {self.d}
        if self.kind == KIND_CYCLIC:
            return {0}
        if self.kind == KIND_DIHEDRAL:
            return {1}
        if self.kind == KIND_FREE:
            return {1} if self.rank == 1 else {"exponential"}
        # wreath over a trivial lamp collapses to the base, so both the
        # base's degree and "exponential" are acceptable declarations
        vals = {"exponential"}
        vals |= self.base._valid_growth_values()
        return vals

    def _validate_growth(self) -> None:
        g = self.declared_growth_degree
        if g is None:
            return
        if isinstance(g, int) and g < 0:
            raise ConfigurationError(
                f"declared_growth_degree must be >= 0, got {g}")
        if g not in self._valid_growth_values():
            raise ConfigurationError(
                f"declared_growth_degree {g!r} inconsistent with kind "
                f"{self.kind!r}")

    # -- (de)serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.d is not None:
            out["d"] = self.d
        if self.m is not None:
            out["m"] = self.m
        if self.rank is not None:
            out["rank"] = self.rank
        if self.lamp is not None:
            out["lamp"] = self.lamp.to_dict()
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.declared_growth_degree is not None:
            out["declared_growth_degree"] = self.declared_growth_degree
        return out

    @staticmethod
    def from_dict(data: dict) -> "GroupSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigurationError(f"group spec must be a record with a "
                                     f"'kind' field, got {data!r}")
        kw = dict(data)
        kind = kw.pop("kind")
        lamp = kw.pop("lamp", None)
        base = kw.pop("base", None)
        growth = kw.pop("declared_growth_degree", None)
        allowed = {"d", "m", "rank"}
        unknown = set(kw) - allowed
        if unknown:
            raise ConfigurationError(
                f"unknown group spec fields: {sorted(unknown)}")
        spec = GroupSpec(
            kind,
            d=kw.get("d"),
            m=kw.get("m"),
            rank=kw.get("rank"),
            lamp=GroupSpec.from_dict(lamp) if lamp is not None else None,
            base=GroupSpec.from_dict(base) if base is not None else None,
            declared_growth_degree=growth,
        )
        spec.validate()
        return spec


class Element:
    """Immutable group element: a handle reference plus canonical payload.

    Equality and hashing go through the canonical key, which is computed
    lazily and cached.
    """

    __slots__ = ("group", "payload", "_key")

    def __init__(self, group: "GroupHandle", payload):
        self.group = group
        self.payload = payload
        self._key = None

    @property
    def key(self) -> bytes:
        k = self._key
        if k is None:
            k = self.group._encode(self.payload)
            self._key = k
        return k

    def __mul__(self, other: "Element") -> "Element":
        return self.group.mul(self, other)

    def inverse(self) -> "Element":
        return self.group.inv(self)

    def is_identity(self) -> bool:
        return self.payload == self.group.identity().payload

    def __eq__(self, other) -> bool:
        if not isinstance(other, Element):
            return NotImplemented
        return self.group is other.group and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"<{self.group.spec.kind} {self.group.describe(self)}>"


class GroupHandle:
    """Realized group: element factory plus the algebraic operations."""

    spec: GroupSpec

    def identity(self) -> Element:
        raise NotImplementedError

    def mul(self, a: Element, b: Element) -> Element:
        self._check_member(a)
        self._check_member(b)
        return Element(self, self._mul_payload(a.payload, b.payload))

    def inv(self, a: Element) -> Element:
        self._check_member(a)
        return Element(self, self._inv_payload(a.payload))

    def canonical_key(self, a: Element) -> bytes:
        self._check_member(a)
        return a.key

    def element(self, payload) -> Element:
        """Build an element from a raw payload, normalizing and checking."""
        return Element(self, self._normalize(payload))

    def describe(self, a: Element) -> str:
        return repr(a.payload)

    def decode_key(self, key: bytes) -> Element:
        payload, rest = self._decode(key)
        if rest:
            raise UsageError(f"trailing bytes in canonical key {key!r}")
        return Element(self, payload)

    # -- internals ----------------------------------------------------------
    def _check_member(self, a: Element) -> None:
        if a.group is not self:
            raise UsageError(
                f"element of {a.group.spec.kind} used with a "
                f"{self.spec.kind} handle; operands must share one handle")

    def _encode(self, payload) -> bytes:
        tag = _TAGS[self.spec.kind]
        if payload == self._identity_payload():
            return tag
        return tag + self._encode_body(payload)

    def _decode(self, key: bytes):
        tag = _TAGS[self.spec.kind]
        if not key.startswith(tag):
            raise UsageError(f"key {key!r} does not belong to a "
                             f"{self.spec.kind} group")
        body = key[len(tag):]
        if not body:
            return self._identity_payload(), b""
        return self._decode_body(body)

    def _identity_payload(self):
        raise NotImplementedError

    def _normalize(self, payload):
        raise NotImplementedError

    def _mul_payload(self, a, b):
        raise NotImplementedError

    def _inv_payload(self, a):
        raise NotImplementedError

    def _encode_body(self, payload) -> bytes:
        raise NotImplementedError

    def _decode_body(self, body: bytes):
        raise NotImplementedError


def _pack_int(v: int) -> bytes:
    return struct.pack("<q", v)


def _unpack_int(body: bytes, offset: int):
    return struct.unpack_from("<q", body, offset)[0], offset + 8


class LatticeGroup(GroupHandle):
    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.d = spec.d
        self._id = Element(self, (0,) * self.d)

    def identity(self) -> Element:
        return self._id

    def _identity_payload(self):
        return (0,) * self.d

    def _normalize(self, payload):
        vec = tuple(int(x) for x in payload)
        if len(vec) != self.d:
            raise UsageError(f"lattice element needs {self.d} coordinates, "
                             f"got {len(vec)}")
        return vec

    def _mul_payload(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def _inv_payload(self, a):
        return tuple(-x for x in a)

    def _encode_body(self, payload) -> bytes:
        return b"".join(_pack_int(x) for x in payload)

    def _decode_body(self, body: bytes):
        vec = []
        off = 0
        for _ in range(self.d):
            v, off = _unpack_int(body, off)
            vec.append(v)
        return tuple(vec), body[off:]


class CyclicGroup(GroupHandle):
    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.m = spec.m
        self._id = Element(self, 0)

    def identity(self) -> Element:
        return self._id

    def _identity_payload(self):
        return 0

    def _normalize(self, payload):
        return int(payload) % self.m

    def _mul_payload(self, a, b):
        return (a + b) % self.m

    def _inv_payload(self, a):
        return (-a) % self.m

    def _encode_body(self, payload) -> bytes:
        # the modulus participates so that distinct cyclic groups never
        # share non-identity keys
        return _pack_int(self.m) + _pack_int(payload)

    def _decode_body(self, body: bytes):
        m, off = _unpack_int(body, 0)
        if m != self.m:
            raise UsageError(f"key encodes cyclic({m}), handle is "
                             f"cyclic({self.m})")
        v, off = _unpack_int(body, off)
        return v, body[off:]


class DihedralGroup(GroupHandle):
    """Infinite dihedral group as pairs (translation, flip bit).

    Product rule: (t1, f1)(t2, f2) = (t1 + (-1)^f1 * t2, f1 xor f2).
    """

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self._id = Element(self, (0, 0))

    def identity(self) -> Element:
        return self._id

    def _identity_payload(self):
        return (0, 0)

    def _normalize(self, payload):
        t, f = payload
        f = int(f)
        if f not in (0, 1):
            raise UsageError(f"flip bit must be 0 or 1, got {f}")
        return (int(t), f)

    def _mul_payload(self, a, b):
        t1, f1 = a
        t2, f2 = b
        return (t1 + (t2 if f1 == 0 else -t2), f1 ^ f2)

    def _inv_payload(self, a):
        t, f = a
        return ((-t, 0) if f == 0 else (t, 1))

    def _encode_body(self, payload) -> bytes:
        t, f = payload
        return _pack_int(t) + struct.pack("<B", f)

    def _decode_body(self, body: bytes):
        t, off = _unpack_int(body, 0)
        f = struct.unpack_from("<B", body, off)[0]
        return (t, f), body[off + 1:]


class FreeGroup(GroupHandle):
    """Free group; elements are freely reduced words.

    A word is a tuple of nonzero ints: +i is the i-th generator (1-based),
    -i its inverse.  Reduction happens inside multiplication, so payloads
    are reduced at all times.
    """

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.rank = spec.rank
        self._id = Element(self, ())

    def identity(self) -> Element:
        return self._id

    def generator(self, i: int) -> Element:
        """The i-th generator, 1-based; negative i gives the inverse."""
        if not 1 <= abs(i) <= self.rank:
            raise UsageError(f"generator index {i} out of range 1..{self.rank}")
        return Element(self, (i,))

    def _identity_payload(self):
        return ()

    def _normalize(self, payload):
        word = []
        for letter in payload:
            letter = int(letter)
            if letter == 0 or abs(letter) > self.rank:
                raise UsageError(f"letter {letter} out of range for "
                                 f"free({self.rank})")
            if word and word[-1] == -letter:
                word.pop()
            else:
                word.append(letter)
        return tuple(word)

    def _mul_payload(self, a, b):
        word = list(a)
        for letter in b:
            if word and word[-1] == -letter:
                word.pop()
            else:
                word.append(letter)
        return tuple(word)

    def _inv_payload(self, a):
        return tuple(-x for x in reversed(a))

    def _encode_body(self, payload) -> bytes:
        return struct.pack("<I", len(payload)) + b"".join(
            struct.pack("<h", x) for x in payload)

    def _decode_body(self, body: bytes):
        n = struct.unpack_from("<I", body, 0)[0]
        off = 4
        word = []
        for _ in range(n):
            word.append(struct.unpack_from("<h", body, off)[0])
            off += 2
        return tuple(word), body[off:]


class WreathGroup(GroupHandle):
    """Wreath product: finitely supported lamp maps over a base group.

    Payload: (lamps, position) with lamps a tuple of (base element, lamp
    element) pairs sorted by base canonical key, never storing identity
    lamp values, and position an element of the base group.
    """

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.lamp_group = make_group(spec.lamp)
        self.base_group = make_group(spec.base)
        self._id = Element(self, ((), self.base_group.identity()))

    def identity(self) -> Element:
        return self._id

    def project_to_base(self, a: Element) -> Element:
        self._check_member(a)
        return a.payload[1]

    def lamp_map(self, a: Element) -> dict:
        """Lamp configuration of ``a`` as a dict base element -> lamp value."""
        self._check_member(a)
        return {b: v for b, v in a.payload[0]}

    def pair(self, lamps: Iterable, position) -> Element:
        """Build an element from (base, lamp) pairs and a base position."""
        return self.element((tuple(lamps), position))

    def _identity_payload(self):
        return ((), self.base_group.identity())

    def _sorted_lamps(self, entries: dict):
        items = [(b, v) for b, v in entries.items()
                 if not v.is_identity()]
        items.sort(key=lambda bv: bv[0].key)
        return tuple(items)

    def _normalize(self, payload):
        lamps, pos = payload
        if not isinstance(pos, Element) or pos.group is not self.base_group:
            pos = self.base_group.element(pos)
        entries = {}
        for b, v in lamps:
            if not isinstance(b, Element) or b.group is not self.base_group:
                b = self.base_group.element(b)
            if not isinstance(v, Element) or v.group is not self.lamp_group:
                v = self.lamp_group.element(v)
            if b in entries:
                entries[b] = entries[b] * v
            else:
                entries[b] = v
        return (self._sorted_lamps(entries), pos)

    def _mul_payload(self, a, b):
        lamps_a, pos_a = a
        lamps_b, pos_b = b
        entries = {pt: v for pt, v in lamps_a}
        # right factor's lamps translate by the left factor's position
        for pt, v in lamps_b:
            moved = self.base_group.mul(pos_a, pt)
            if moved in entries:
                entries[moved] = self.lamp_group.mul(entries[moved], v)
            else:
                entries[moved] = v
        return (self._sorted_lamps(entries),
                self.base_group.mul(pos_a, pos_b))

    def _inv_payload(self, a):
        lamps, pos = a
        inv_pos = self.base_group.inv(pos)
        entries = {}
        for pt, v in lamps:
            entries[self.base_group.mul(inv_pos, pt)] = self.lamp_group.inv(v)
        return (self._sorted_lamps(entries), inv_pos)

    def _encode_body(self, payload) -> bytes:
        lamps, pos = payload
        parts = [struct.pack("<I", len(lamps))]
        for b, v in lamps:
            bk, vk = b.key, v.key
            parts.append(struct.pack("<I", len(bk)))
            parts.append(bk)
            parts.append(struct.pack("<I", len(vk)))
            parts.append(vk)
        pk = pos.key
        parts.append(struct.pack("<I", len(pk)))
        parts.append(pk)
        return b"".join(parts)

    def _decode_body(self, body: bytes):
        n = struct.unpack_from("<I", body, 0)[0]
        off = 4
        lamps = []
        for _ in range(n):
            lb = struct.unpack_from("<I", body, off)[0]
            off += 4
            b = self.base_group.decode_key(body[off:off + lb])
            off += lb
            lv = struct.unpack_from("<I", body, off)[0]
            off += 4
            v = self.lamp_group.decode_key(body[off:off + lv])
            off += lv
            lamps.append((b, v))
        lp = struct.unpack_from("<I", body, off)[0]
        off += 4
        pos = self.base_group.decode_key(body[off:off + lp])
        off += lp
        return (tuple(lamps), pos), body[off:]

    def describe(self, a: Element) -> str:
        lamps, pos = a.payload
        lamp_str = ", ".join(
            f"{b.payload!r}->{v.payload!r}" for b, v in lamps)
        return f"lamps{{{lamp_str}}} pos={pos.payload!r}"


_HANDLE_CLASSES = {
    KIND_LATTICE: LatticeGroup,
    KIND_CYCLIC: CyclicGroup,
    KIND_DIHEDRAL: DihedralGroup,
    KIND_FREE: FreeGroup,
    KIND_WREATH: WreathGroup,
}


def make_group(spec: GroupSpec) -> GroupHandle:
    """Realize a group from its spec; raises ConfigurationError if malformed."""
    spec.validate()
    return _HANDLE_CLASSES[spec.kind](spec)


def mul(a: Element, b: Element) -> Element:
    if a.group is not b.group:
        raise UsageError("mul operands belong to different group handles")
    return a.group.mul(a, b)


def inv(a: Element) -> Element:
    return a.group.inv(a)


def canonical_key(a: Element) -> bytes:
    return a.key


def project_to_base(a: Element) -> Element:
    if not isinstance(a.group, WreathGroup):
        raise UsageError("project_to_base needs a wreath-product element")
    return a.group.project_to_base(a)


@dataclass(frozen=True)
class GeneratingSet:
    """Finite generating set; the symmetric flag asserts inverse-closure."""

    elements: tuple
    symmetric: bool = False

    def __post_init__(self):
        if not self.elements:
            raise ConfigurationError("generating set must be non-empty")
        if self.symmetric:
            keys = {g.key for g in self.elements}
            for g in self.elements:
                if g.inverse().key not in keys:
                    raise ConfigurationError(
                        f"set flagged symmetric but {g!r} lacks its inverse")


def ball_size(gen: GeneratingSet, n: int, budget: int = 10_000_000) -> int:
    """Exact size of (S u {e})^n by breadth-first closure over keys.

    Raises ResourceError (with the last completed radius in ``partial``)
    once the visited set would exceed ``budget`` keys.
    """
    if n < 0:
        raise UsageError(f"ball radius must be >= 0, got {n}")
    group = gen.elements[0].group
    seen = {group.identity().key: group.identity()}
    frontier = [group.identity()]
    for radius in range(1, n + 1):
        new_frontier = []
        for x in frontier:
            for s in gen.elements:
                y = x * s
                if y.key not in seen:
                    seen[y.key] = y
                    new_frontier.append(y)
                    if len(seen) > budget:
                        raise ResourceError(
                            f"ball exceeded budget of {budget} elements "
                            f"(radius {radius - 1} completed)",
                            partial=radius - 1)
        frontier = new_frontier
        if not frontier:
            break
    return len(seen)


def closure_power(elements: Iterable[Element], n: int,
                  budget: int = 10_000_000) -> frozenset:
    """The set of all products of exactly n factors drawn from ``elements``.

    When the identity belongs to the input this equals the n-ball, which is
    how coarse-neighborhood sets R^t0 are materialized.
    """
    elems = list(elements)
    if not elems:
        raise UsageError("closure_power needs a non-empty element set")
    group = elems[0].group
    current = {group.identity().key: group.identity()}
    for _ in range(n):
        nxt = {}
        for x in current.values():
            for s in elems:
                y = x * s
                nxt[y.key] = y
                if len(nxt) > budget:
                    raise ResourceError(
                        f"closure power exceeded budget of {budget} elements")
        current = nxt
    return frozenset(current.values())
