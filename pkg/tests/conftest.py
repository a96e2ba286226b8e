import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from groupwalks import GroupSpec, make_group, make_measure


@pytest.fixture(scope="session")
def z1():
    return make_group(GroupSpec.lattice(1, growth=1))


@pytest.fixture(scope="session")
def z2():
    return make_group(GroupSpec.lattice(2, growth=2))


@pytest.fixture(scope="session")
def z3():
    return make_group(GroupSpec.lattice(3, growth=3))


@pytest.fixture(scope="session")
def free2():
    return make_group(GroupSpec.free(2))


@pytest.fixture(scope="session")
def dinf():
    return make_group(GroupSpec.dihedral())


@pytest.fixture(scope="session")
def lamplighter_z():
    return make_group(GroupSpec.wreath(GroupSpec.cyclic(2),
                                       GroupSpec.lattice(1, growth=1)))


@pytest.fixture(scope="session")
def lamplighter_z3():
    return make_group(GroupSpec.wreath(GroupSpec.cyclic(2),
                                       GroupSpec.lattice(3, growth=3)))


def srw(group):
    d = group.spec.d
    pairs = []
    for i in range(d):
        for s in (1, -1):
            v = [0] * d
            v[i] = s
            pairs.append((group.element(tuple(v)), 1.0 / (2 * d)))
    return make_measure(group, pairs)


@pytest.fixture(scope="session")
def srw_z1(z1):
    return srw(z1)


@pytest.fixture(scope="session")
def srw_z3(z3):
    return srw(z3)


@pytest.fixture(scope="session")
def lazy_srw_z3(z3, srw_z3):
    pairs = [(z3.identity(), 0.5)]
    pairs += [(g, m / 2) for g, m in srw_z3.atoms()]
    return make_measure(z3, pairs)


@pytest.fixture(scope="session")
def biased_z(z1):
    return make_measure(z1, [(z1.element((1,)), 2 / 3),
                             (z1.element((-1,)), 1 / 3)])


def lamplighter_micro_measure(group):
    """3-atom walk on Z/2 wr Z: step right, step left, flip in place."""
    base = group.base_group
    lamp = group.lamp_group
    right = group.pair([], base.element((1,)))
    left = group.pair([], base.element((-1,)))
    flip = group.pair([(base.identity(), lamp.element(1))], base.identity())
    return make_measure(group, [(right, 1 / 3), (left, 1 / 3), (flip, 1 / 3)])


@pytest.fixture(scope="session")
def micro_measure(lamplighter_z):
    return lamplighter_micro_measure(lamplighter_z)


def switch_walk_13(group):
    """13-atom switch-walk on Z/2 wr Z^3: identity (mass 1/13), the six
    lattice moves (3/65 each), and flip-then-move for each move (7/65)."""
    base = group.base_group
    lamp = group.lamp_group
    flip = group.pair([(base.identity(), lamp.element(1))], base.identity())
    pairs = [(group.identity(), 1 / 13)]
    for i in range(3):
        for s in (1, -1):
            v = [0, 0, 0]
            v[i] = s
            move = group.pair([], base.element(tuple(v)))
            pairs.append((move, 3 / 65))
            pairs.append((flip * move, 7 / 65))
    return make_measure(group, pairs)


@pytest.fixture(scope="session")
def switch_walk(lamplighter_z3):
    return switch_walk_13(lamplighter_z3)


def random_element(handle, rng: np.random.Generator):
    """Random element of moderate size, for algebra property tests."""
    kind = handle.spec.kind
    if kind == "integer-lattice":
        return handle.element(tuple(int(x) for x in
                                    rng.integers(-8, 9, handle.spec.d)))
    if kind == "cyclic":
        return handle.element(int(rng.integers(0, handle.spec.m)))
    if kind == "infinite-dihedral":
        return handle.element((int(rng.integers(-8, 9)),
                               int(rng.integers(0, 2))))
    if kind == "free":
        length = int(rng.integers(0, 7))
        letters = []
        for _ in range(length):
            letter = int(rng.integers(1, handle.spec.rank + 1))
            letters.append(letter if rng.integers(0, 2) else -letter)
        return handle.element(tuple(letters))
    if kind == "wreath":
        n_lamps = int(rng.integers(0, 4))
        lamps = []
        for _ in range(n_lamps):
            b = random_element(handle.base_group, rng)
            v = random_element(handle.lamp_group, rng)
            lamps.append((b, v))
        return handle.pair(lamps, random_element(handle.base_group, rng))
    raise ValueError(kind)
