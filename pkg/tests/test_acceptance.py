"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Scales and tolerances are pinned here; nothing is deferred to calibration.
"""
import math
import time

import numpy as np
import pytest

from groupwalks import (CoarseSpec, CSCInputs, GeneratingSet, GroupSpec,
                        WalkConfig, avez_profile, ball_size, csc_constant,
                        convolve_power, delta, entropy_bracket,
                        chung_fuchs_escape, escape_from_green, escape_mc,
                        exact_conditional_entropy, exact_partition_entropy,
                        green_sum, heavy_tail_family, make_group,
                        make_measure, mixture_family, plugin_partition_entropy,
                        pushforward, range_rate_profile, shannon_entropy,
                        sup_kernel_profile, tail_model_from_profile,
                        tail_visit_profile, verify_comparison)

import oracles
from conftest import random_element, srw, switch_walk_13


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


class TestCriterion1:
    def test_escape_srw_z3(self, z3, srw_z3):
        started = time.monotonic()
        cf = chung_fuchs_escape(srw_z3, grid=64, refinements=3)
        cf_ok = (abs(cf.point - 0.6595) <= 1e-3
                 and abs(cf.point - oracles.watson_escape()) <= 1e-3
                 and cf.std_error <= 1e-3)

        prof = sup_kernel_profile(srw_z3, 40)
        model = tail_model_from_profile(prof, 3, range(2, 41))
        green = escape_from_green(srw_z3, 60, tail_model=model)
        width = green.upper - green.lower
        green_ok = (green.lower <= cf.point <= green.upper
                    and green.lower <= 0.6595 <= green.upper
                    and width <= 0.05)

        mc = escape_mc(srw_z3, WalkConfig(steps=10_000, samples=1_000,
                                          master_seed=404))
        rr = mc.range_rate
        mc_ok = abs(rr.point - green.point) \
            <= 3 * (rr.std_error + width)
        elapsed = time.monotonic() - started
        _report(1, cf_ok and green_ok and mc_ok and elapsed <= 120,
                f"chung-fuchs {cf.point:.6f} (agreement {cf.std_error:.1e}), "
                f"green interval [{green.lower:.4f}, {green.upper:.4f}] "
                f"width {width:.4f}, range rate {rr.point:.4f}, "
                f"{elapsed:.0f}s")


class TestCriterion2:
    def test_biased_walk_green_identity(self, biased_z):
        started = time.monotonic()
        total, last = green_sum(biased_z, 60)
        # the exact tail beyond n = 60 is 0.0213, so convergence to 3.000 is
        # asserted at the 1e-2 relative scale together with term decay
        sums_ok = abs(total - 3.0) / 3.0 <= 1e-2 and last <= 1e-2
        inverse_ok = abs(1.0 / total - 1.0 / 3.0) <= 1e-2

        mc = escape_mc(biased_z, WalkConfig(steps=10_000, samples=1_000,
                                            master_seed=405))
        target = oracles.gamblers_ruin_escape(2 / 3)
        range_ok = abs(mc.range_rate.point - target) <= 0.02
        elapsed = time.monotonic() - started
        _report(2, sums_ok and inverse_ok and range_ok and elapsed <= 30,
                f"partial sum {total:.4f} (last term {last:.2e}), "
                f"1/sum {1 / total:.4f} vs 1/3, "
                f"range rate {mc.range_rate.point:.4f}, {elapsed:.0f}s")


class TestCriterion3:
    def test_heavy_tail_discontinuity(self, z1):
        started = time.monotonic()
        family = heavy_tail_family(z1, exponent=1.5, proxy_k=4096)
        cfg = WalkConfig(steps=10_000, samples=1_000, master_seed=406)
        decreases_ok = True
        finals = {}
        for k in (4, 16, 64):
            prof = range_rate_profile(family(k), cfg, [1_000, 10_000])
            gap = prof.gaps[0]
            decreases_ok &= gap.point >= 2 * gap.std_error
            finals[k] = prof.entries[-1][1]
        proxy = range_rate_profile(family(4096), cfg, [1_000, 10_000])
        proxy_final = proxy.entries[-1][1]
        proxy_ok = proxy_final.point >= 0.05
        sep_ok = all(
            proxy_final.point - e.point
            >= 5 * math.hypot(proxy_final.std_error, e.std_error)
            for e in finals.values())
        elapsed = time.monotonic() - started
        _report(3, decreases_ok and proxy_ok and sep_ok and elapsed <= 180,
                f"recurrent members at n=1e4: "
                f"{[round(e.point, 4) for e in finals.values()]}, "
                f"proxy {proxy_final.point:.4f}, {elapsed:.0f}s")


class TestCriterion4:
    def test_entropy_laws_exact(self, srw_z1, biased_z, micro_measure,
                                switch_walk, free2):
        from test_entropy import uniform_free_step
        profiles = [
            avez_profile(srw_z1, 10),
            avez_profile(biased_z, 10),
            avez_profile(micro_measure, 6),
            avez_profile(switch_walk, 4),
            avez_profile(uniform_free_step(free2), 8),
        ]
        ok = True
        for prof in profiles:
            hs = {n: h for n, h, d in prof.entries}
            assert prof.max_deficit == 0.0
            for a in hs:
                for b in hs:
                    if a + b in hs:
                        ok &= hs[a + b] <= hs[a] + hs[b] + 1e-12
            ordered = [hs[n] for n in sorted(hs)]
            ok &= all(y >= x - 1e-12 for x, y in zip(ordered, ordered[1:]))
            bracket = entropy_bracket(prof)
            ok &= bracket.lower <= bracket.upper
        _report(4, ok, f"{len(profiles)} deficit-free profiles: "
                       f"subadditivity, monotonicity, bracket soundness "
                       f"at 1e-12")


class TestCriterion5:
    def test_fixed_n_entropy_continuity(self, switch_walk):
        started = time.monotonic()
        contaminant = next(
            g for g, _ in switch_walk.atoms()
            if g.payload[0] and not g.payload[1].is_identity())
        family = mixture_family(switch_walk, contaminant)
        h_limit = shannon_entropy(convolve_power(switch_walk, 4))
        ks = [2, 4, 8, 16, 32]
        diffs = []
        for k in ks:
            hk = shannon_entropy(convolve_power(family(k), 4))
            diffs.append(abs(hk - h_limit))
        decreasing = all(a > b for a, b in zip(diffs, diffs[1:]))
        small = diffs[-1] <= 0.02

        from groupwalks import continuity_experiment, semicontinuity_check
        table = continuity_experiment(family, ks, 4)
        verdict = semicontinuity_check(table, tolerance=1e-9)
        elapsed = time.monotonic() - started
        _report(5, decreasing and small and verdict.passed
                and elapsed <= 300,
                f"diffs {[round(d, 4) for d in diffs]}, semicontinuity "
                f"margin {verdict.margin:.2e}, {elapsed:.0f}s")


class TestCriterion6:
    def test_comparison_pipeline(self, srw_z3, lazy_srw_z3):
        started = time.monotonic()
        report = verify_comparison(srw_z3, lazy_srw_z3, 3, 200,
                                   fit_range=range(2, 61))
        clause_ok = (report.passed and report.c1 == pytest.approx(2.0)
                     and report.min_margin > 0)
        trace = report.trace
        xi = trace.xi_coefficient
        resid_ok = all(
            abs(nxt + xi * nxt ** (1 + 2 / trace.d) - prev) <= 1e-10 * prev
            for prev, nxt in zip(trace.m_sequence, trace.m_sequence[1:]))
        dominate_ok = trace.C_out >= trace.C2

        anchor = csc_constant(CSCInputs(2.0, 1.0, 3.0))
        anchor_ok = (anchor.K == 4
                     and anchor.C_out == pytest.approx(17.0 ** 1.5,
                                                       abs=1e-9))
        elapsed = time.monotonic() - started
        _report(6, clause_ok and resid_ok and dominate_ok and anchor_ok
                and elapsed <= 120,
                f"bound margin {report.min_margin:.4f} over n <= 200, "
                f"C_out {trace.C_out:.2f} >= C2 {trace.C2:.4f}, anchor "
                f"C_out(2,1,3) = {anchor.C_out:.4f}, {elapsed:.0f}s")


class TestCriterion7:
    def test_exact_coarse_identities(self, micro_measure, lamplighter_z):
        started = time.monotonic()
        base, lamp = lamplighter_z.base_group, lamplighter_z.lamp_group
        spec = CoarseSpec(t0=2, N=1, n0=1,
                          L=(lamp.identity(), lamp.element(1)),
                          R=(base.identity(), base.element((1,))))
        slices = exact_partition_entropy(micro_measure,
                                         "coarse_slices_wreath", 6, spec)
        h2 = shannon_entropy(convolve_power(micro_measure, 2))
        additive_ok = abs(slices.point - 3 * h2) <= 1e-12

        lamps_out = exact_conditional_entropy(
            micro_measure, ["lamps_out_coarse"],
            ["coarse_trajectory", "bad_increments"], 6, spec)
        determined_ok = abs(lamps_out) <= 1e-12

        from groupwalks import exact_joint_law
        law_ab = exact_joint_law(micro_measure,
                                 ["coarse_slices_wreath", "bad_increments"],
                                 6, spec)
        law_b = exact_joint_law(micro_measure, ["bad_increments"], 6, spec)
        entropy = lambda law: -sum(p * math.log(p)
                                   for p in law.values() if p > 0)
        cond = exact_conditional_entropy(micro_measure,
                                         ["coarse_slices_wreath"],
                                         ["bad_increments"], 6, spec)
        chain_ok = abs(entropy(law_ab) - entropy(law_b) - cond) <= 1e-12
        cond_two = exact_conditional_entropy(
            micro_measure, ["coarse_slices_wreath"],
            ["bad_increments", "coarse_trajectory"], 6, spec)
        monotone_ok = cond_two <= cond + 1e-12 \
            and cond <= slices.point + 1e-12
        elapsed = time.monotonic() - started
        _report(7, additive_ok and determined_ok and chain_ok
                and monotone_ok and elapsed <= 10,
                f"slices {slices.point:.6f} = 3 x {h2:.6f}, "
                f"outside-lamps conditional {lamps_out:.2e}, "
                f"{elapsed:.1f}s")


class TestCriterion8:
    def test_plugin_consistency(self, micro_measure, lamplighter_z):
        started = time.monotonic()
        base, lamp = lamplighter_z.base_group, lamplighter_z.lamp_group
        spec = CoarseSpec(t0=2, N=1, n0=1,
                          L=(lamp.identity(), lamp.element(1)),
                          R=(base.identity(), base.element((1,))))
        exact = exact_partition_entropy(micro_measure, "bad_increments", 6,
                                        spec).point
        plug = plugin_partition_entropy(
            micro_measure, "bad_increments", 6, spec,
            WalkConfig(steps=6, samples=10_000, master_seed=0))
        close_ok = abs(plug.point - exact) <= 0.05

        mm_wins = 0
        for seed in range(5):
            est = plugin_partition_entropy(
                micro_measure, "bad_increments", 6, spec,
                WalkConfig(steps=6, samples=10_000, master_seed=seed))
            if abs(est.miller_madow - exact) <= abs(est.point - exact):
                mm_wins += 1
        elapsed = time.monotonic() - started
        _report(8, close_ok and mm_wins >= 3 and elapsed <= 30,
                f"plug-in {plug.point:.4f} vs exact {exact:.4f}, "
                f"miller-madow closer in {mm_wins}/5 seeds, {elapsed:.0f}s")


class TestCriterion9:
    def test_tail_visit_decay(self, srw_z3):
        started = time.monotonic()
        cfg = WalkConfig(steps=1_000, samples=2_000, master_seed=407)
        prof = tail_visit_profile(srw_z3, [srw_z3.group.identity()],
                                  [10, 50, 200], cfg)
        gaps_ok = all(g.point >= 2 * g.std_error for g in prof.gaps)
        points = [e.point for _, e in prof.entries]
        strict_ok = points[0] > points[1] > points[2]
        elapsed = time.monotonic() - started
        _report(9, gaps_ok and strict_ok and elapsed <= 60,
                f"tail-visit {[round(p, 4) for p in points]} with 2-sigma "
                f"gaps, {elapsed:.0f}s")


class TestCriterion10:
    KINDS = {
        "integer-lattice-3": GroupSpec.lattice(3),
        "cyclic-12": GroupSpec.cyclic(12),
        "infinite-dihedral": GroupSpec.dihedral(),
        "free-2": GroupSpec.free(2),
        "lamplighter": GroupSpec.wreath(GroupSpec.cyclic(2),
                                        GroupSpec.lattice(1)),
    }

    def test_group_property_suite(self):
        started = time.monotonic()
        failures = 0
        for name, spec in self.KINDS.items():
            handle = make_group(spec)
            rng = np.random.default_rng(abs(hash(name)) % 2 ** 32)
            e = handle.identity()
            is_wreath = spec.kind == "wreath"
            for _ in range(10_000):
                a = random_element(handle, rng)
                b = random_element(handle, rng)
                c = random_element(handle, rng)
                if ((a * b) * c).key != (a * (b * c)).key:
                    failures += 1
                if (a * e).key != a.key or (a * a.inverse()).key != e.key:
                    failures += 1
                if a.inverse().inverse().key != a.key:
                    failures += 1
                if is_wreath:
                    from groupwalks import project_to_base
                    if project_to_base(a * b).key != \
                            (project_to_base(a) * project_to_base(b)).key:
                        failures += 1

        balls_ok = True
        z2 = make_group(GroupSpec.lattice(2))
        z3 = make_group(GroupSpec.lattice(3))
        dinf = make_group(GroupSpec.dihedral())
        free2 = make_group(GroupSpec.free(2))
        for n in range(0, 7):
            gens2 = [z2.element(v) for v in ((1, 0), (-1, 0), (0, 1),
                                             (0, -1))]
            balls_ok &= ball_size(GeneratingSet(tuple(gens2),
                                                symmetric=True), n) \
                == oracles.brute_ball_lattice(2, n)
            gens3 = []
            for i in range(3):
                for s in (1, -1):
                    v = [0, 0, 0]
                    v[i] = s
                    gens3.append(z3.element(tuple(v)))
            balls_ok &= ball_size(GeneratingSet(tuple(gens3),
                                                symmetric=True), n) \
                == oracles.brute_ball_lattice(3, n)
            dgens = [(1, 0), (-1, 0), (0, 1)]
            balls_ok &= ball_size(
                GeneratingSet(tuple(dinf.element(g) for g in dgens),
                              symmetric=True), n) \
                == oracles.brute_ball_words(oracles.dihedral_mul, (0, 0),
                                            dgens, n)
            fgens = [(1,), (-1,), (2,), (-2,)]
            balls_ok &= ball_size(
                GeneratingSet(tuple(free2.element(g) for g in fgens),
                              symmetric=True), n) \
                == oracles.brute_ball_words(oracles.free_mul, (), fgens, n)
        elapsed = time.monotonic() - started
        _report(10, failures == 0 and balls_ok,
                f"0 algebra failures over 5 kinds x 10^4 triples, ball "
                f"sizes match brute force to radius 6, {elapsed:.0f}s")
