import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupwalks import (ConfigurationError, GeneratingSet, GroupSpec,
                        ResourceError, UsageError, ball_size, canonical_key,
                        make_group, mul, project_to_base)

import oracles
from conftest import random_element


class TestMakeGroup:
    def test_lattice_identity(self, z3):
        assert z3.identity().payload == (0, 0, 0)

    def test_lamplighter_construction(self):
        g = make_group(GroupSpec.wreath(GroupSpec.cyclic(2),
                                        GroupSpec.lattice(1)))
        lamps, pos = g.identity().payload
        assert lamps == () and pos.payload == (0,)

    def test_free_identity_is_empty_word(self, free2):
        assert free2.identity().payload == ()

    @pytest.mark.parametrize("spec", [
        GroupSpec.lattice(0),
        GroupSpec.cyclic(0),
        GroupSpec.free(0),
        GroupSpec("wreath"),
        GroupSpec("no-such-kind"),
        GroupSpec.lattice(2, growth=3),
    ])
    def test_malformed_specs_rejected(self, spec):
        with pytest.raises(ConfigurationError):
            make_group(spec)

    def test_spec_roundtrip(self):
        spec = GroupSpec.wreath(GroupSpec.cyclic(2), GroupSpec.lattice(3),
                                growth="exponential")
        assert GroupSpec.from_dict(spec.to_dict()) == spec


class TestMul:
    def test_lattice_addition(self, z3):
        a = z3.element((1, 0, 0))
        b = z3.element((0, 2, 0))
        assert mul(a, b).payload == (1, 2, 0)

    def test_lamplighter_base_move_keeps_lamps(self, lamplighter_z):
        g = lamplighter_z
        base, lamp = g.base_group, g.lamp_group
        a = g.pair([(base.element((0,)), lamp.element(1))], base.element((0,)))
        b = g.pair([], base.element((1,)))
        lamps, pos = (a * b).payload
        assert pos.payload == (1,)
        assert [(p.payload, v.payload) for p, v in lamps] == [((0,), 1)]

    def test_lamplighter_translated_lamp(self, lamplighter_z):
        # (empty lamps, pos 1) * (lamp at 0, pos 0): the right factor's lamp
        # lands at the left factor's position
        g = lamplighter_z
        base, lamp = g.base_group, g.lamp_group
        a = g.pair([], base.element((1,)))
        b = g.pair([(base.element((0,)), lamp.element(1))], base.element((0,)))
        lamps, pos = (a * b).payload
        assert pos.payload == (1,)
        assert [(p.payload, v.payload) for p, v in lamps] == [((1,), 1)]

    def test_mixed_groups_rejected(self, z1, z3):
        with pytest.raises(UsageError):
            mul(z1.element((1,)), z3.element((1, 0, 0)))


class TestInv:
    def test_lattice_negation(self, z3):
        assert z3.element((1, -2, 0)).inverse().payload == (-1, 2, 0)

    def test_free_reverse_and_invert(self, free2):
        # word a b^{-1} inverts to b a^{-1}
        word = free2.element((1, -2))
        assert word.inverse().payload == (2, -1)

    def test_lamplighter_inverse(self, lamplighter_z):
        g = lamplighter_z
        base, lamp = g.base_group, g.lamp_group
        a = g.pair([(base.element((1,)), lamp.element(1))], base.element((1,)))
        ai = a.inverse()
        lamps, pos = ai.payload
        assert pos.payload == (-1,)
        assert [(p.payload, v.payload) for p, v in lamps] == [((0,), 1)]
        assert (a * ai).key == g.identity().key


class TestCanonicalKey:
    def test_identity_is_bare_tag(self, z3, free2, lamplighter_z):
        for g in (z3, free2, lamplighter_z):
            assert len(canonical_key(g.identity())) == 1

    def test_equal_elements_equal_keys(self, z2):
        a = z2.element((1, 0)) * z2.element((2, -1))
        b = z2.element((0, -1)) * z2.element((3, 0))
        assert a.payload == (3, -1) == b.payload
        assert a.key == b.key

    def test_wreath_products_same_key(self, lamplighter_z):
        g = lamplighter_z
        base, lamp = g.base_group, g.lamp_group
        flip = g.pair([(base.identity(), lamp.element(1))], base.identity())
        step = g.pair([], base.element((1,)))
        # flip at 0 then move, versus arriving and flipping behind
        left = flip * step
        right_path = step * g.pair(
            [(base.element((-1,)), lamp.element(1))], base.identity())
        assert left.key == right_path.key

    def test_injective_on_ball(self, dinf):
        gens = [dinf.element((1, 0)), dinf.element((-1, 0)),
                dinf.element((0, 1))]
        seen = {}
        frontier = [dinf.identity()]
        elems = {dinf.identity().key: dinf.identity()}
        for _ in range(5):
            nxt = []
            for x in frontier:
                for s in gens:
                    y = x * s
                    if y.key not in elems:
                        elems[y.key] = y
                        nxt.append(y)
            frontier = nxt
        payloads = {e.payload for e in elems.values()}
        assert len(payloads) == len(elems)


class TestBallSize:
    def test_z1_interval(self, z1):
        gens = GeneratingSet((z1.element((1,)), z1.element((-1,))),
                             symmetric=True)
        assert ball_size(gens, 3) == 7

    def test_z3_radius2(self, z3, srw_z3):
        gens = GeneratingSet(tuple(srw_z3.support()), symmetric=True)
        assert ball_size(gens, 2) == 25
        assert ball_size(gens, 2) == oracles.brute_ball_lattice(3, 2)

    def test_radius0(self, free2):
        gens = GeneratingSet((free2.generator(1), free2.generator(-1)))
        assert ball_size(gens, 0) == 1

    def test_budget_error_reports_radius(self, free2):
        gens = GeneratingSet(tuple(free2.generator(i)
                                   for i in (1, -1, 2, -2)), symmetric=True)
        with pytest.raises(ResourceError) as err:
            ball_size(gens, 12, budget=100)
        assert err.value.partial is not None

    @pytest.mark.parametrize("d,n", [(2, 4), (3, 3)])
    def test_matches_brute_force(self, d, n):
        group = make_group(GroupSpec.lattice(d))
        gens = []
        for i in range(d):
            for s in (1, -1):
                v = [0] * d
                v[i] = s
                gens.append(group.element(tuple(v)))
        assert ball_size(GeneratingSet(tuple(gens), symmetric=True), n) \
            == oracles.brute_ball_lattice(d, n)

    def test_lattice_growth_degree_window(self, z3, srw_z3):
        gens = GeneratingSet(tuple(srw_z3.support()), symmetric=True)
        sizes = {n: ball_size(gens, n) for n in (4, 8, 16, 32)}
        ratios = [sizes[n] / n ** 3 for n in sizes]
        assert 0.5 < min(ratios) and max(ratios) < 8

    def test_nondecreasing(self, dinf):
        gens = GeneratingSet((dinf.element((1, 0)), dinf.element((-1, 0)),
                              dinf.element((0, 1))), symmetric=True)
        sizes = [ball_size(gens, n) for n in range(7)]
        assert sizes == sorted(sizes)


class TestProjection:
    def test_component_extraction(self, lamplighter_z):
        g = lamplighter_z
        base, lamp = g.base_group, g.lamp_group
        a = g.pair([(base.element((0,)), lamp.element(1))],
                   base.element((5,)))
        assert project_to_base(a).payload == (5,)

    def test_identity(self, lamplighter_z):
        assert project_to_base(lamplighter_z.identity()).payload == (0,)

    def test_homomorphism_on_random_pairs(self, lamplighter_z):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = random_element(lamplighter_z, rng)
            b = random_element(lamplighter_z, rng)
            assert project_to_base(a * b).key == \
                (project_to_base(a) * project_to_base(b)).key
            assert project_to_base(a.inverse()).key == \
                project_to_base(a).inverse().key

    def test_non_wreath_rejected(self, z3):
        with pytest.raises(UsageError):
            project_to_base(z3.element((1, 0, 0)))


class TestGroupLaws:
    @pytest.mark.parametrize("fixture", ["z3", "free2", "dinf",
                                         "lamplighter_z"])
    def test_algebra_laws_random(self, fixture, request):
        handle = request.getfixturevalue(fixture)
        rng = np.random.default_rng(hash(fixture) % 2 ** 32)
        e = handle.identity()
        for _ in range(500):
            a = random_element(handle, rng)
            b = random_element(handle, rng)
            c = random_element(handle, rng)
            assert ((a * b) * c).key == (a * (b * c)).key
            assert (a * e).key == a.key and (e * a).key == a.key
            assert (a * a.inverse()).key == e.key
            assert a.inverse().inverse().key == a.key

    def test_dihedral_matches_oracle(self, dinf):
        rng = np.random.default_rng(3)
        for _ in range(300):
            a = random_element(dinf, rng)
            b = random_element(dinf, rng)
            assert (a * b).payload == oracles.dihedral_mul(a.payload,
                                                           b.payload)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=-2, max_value=2).filter(lambda x: x != 0),
                max_size=12))
def test_free_words_always_reduced(letters):
    free2 = make_group(GroupSpec.free(2))
    word = free2.element(tuple(letters)).payload
    assert all(word[i] != -word[i + 1] for i in range(len(word) - 1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(0, 1)),
                min_size=1, max_size=8))
def test_dihedral_word_matches_oracle(ops):
    dinf = make_group(GroupSpec.dihedral())
    x = dinf.identity()
    expected = (0, 0)
    for t, f in ops:
        x = x * dinf.element((t, f))
        expected = oracles.dihedral_mul(expected, (t, f))
    assert x.payload == expected
