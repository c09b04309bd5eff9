import math

import numpy as np
import pytest

from erminv.errors import ConfigError, NetTooLargeError
from erminv.indexing import CoefficientVector, MultiIndex, TrigSpace
from erminv.spaces import (
    Ellipsoid,
    build_delta_net,
    build_packing_set,
    certify_covering,
    net_cardinality_exponent,
    truncation_level,
)


def ellipsoid_1d(s=1.0, L=1.0, C1=1.0, C2=1.0):
    return Ellipsoid(TrigSpace(1), s=s, L=L, C1=C1, C2=C2)


class TestEllipsoid:
    def test_weight_envelope(self):
        e = Ellipsoid(TrigSpace(1), s=2.0, L=1.0, C1=0.5, C2=2.0)
        for idx in e.space.indices_up_to(6):
            t = idx.total
            if t >= 1:
                assert 0.5 * t**2 <= e.weight(idx) <= 2.0 * t**2
            assert e.weight(idx) > 0

    def test_violating_override_rejected(self):
        idx = MultiIndex((2,), (0,))
        with pytest.raises(ConfigError):
            Ellipsoid(TrigSpace(1), s=1.0, L=1.0, overrides={idx: 100.0})

    def test_uniform_sampling_stays_inside_and_fills(self):
        e = ellipsoid_1d(s=1.0, L=2.0)
        support = e.index_set_up_to(4)
        rng = np.random.default_rng(5)
        pts = e.sample_uniform(support, 4000, rng)
        a = e.weights_array(support)
        norms = np.sqrt((pts**2 * a**2).sum(axis=1)) / e.L
        assert norms.max() <= 1.0 + 1e-12
        # radius^m is uniform for the exact solid law
        u = norms ** len(support)
        assert abs(u.mean() - 0.5) < 0.03


class TestTruncationLevel:
    def test_hand_value_s1(self):
        # floor(sqrt(2) * 10) = 14
        assert truncation_level(ellipsoid_1d(s=1.0), 0.1) == 14

    def test_hand_value_s2(self):
        # floor((sqrt(2)/sqrt(2))^(1/2)) = 1
        assert truncation_level(ellipsoid_1d(s=2.0, L=1.0), math.sqrt(2.0) - 1e-12) == 1

    def test_boundary_case(self):
        e = ellipsoid_1d(s=1.0, C1=math.sqrt(2.0), C2=math.sqrt(2.0))
        assert truncation_level(e, 1.0 - 1e-9) == 1

    def test_degenerate_delta_rejected(self):
        # beyond sqrt(2) L / C1 the level would be 0
        with pytest.raises(ConfigError, match="degenerates"):
            truncation_level(ellipsoid_1d(), 1.5)
        with pytest.raises(ConfigError):
            truncation_level(ellipsoid_1d(), 0.0)

    def test_tail_bound(self):
        # Eq. guarantee: sum_{|j|>M} theta_j^2 <= delta^2/2 on the ellipsoid
        e = ellipsoid_1d(s=1.3, L=1.7)
        rng = np.random.default_rng(6)
        for delta in (0.9, 0.45, 0.21):
            M = truncation_level(e, delta)
            ext = e.index_set_up_to(M + 25)
            samples = e.sample_uniform(ext, 1000, rng)
            tail_cols = np.array([idx.total > M for idx in ext.indices])
            tail = (samples[:, tail_cols] ** 2).sum(axis=1)
            assert tail.max() <= delta**2 / 2 + 1e-12


class TestDeltaNet:
    def test_contains_zero_and_inside_ellipsoid(self):
        e = ellipsoid_1d(s=2.0, L=1.0)
        net = build_delta_net(e, 0.5)
        a = e.weights_array(net.support)
        wnorm = (net.points**2 * a**2).sum(axis=1)
        assert wnorm.max() <= e.L**2 + 1e-12
        assert np.any(np.all(net.points == 0.0, axis=1))

    def test_covering_certification(self):
        # oracle: sample the class, brute-force nearest net point
        e = ellipsoid_1d(s=2.0, L=1.0)
        for delta in (0.6, 0.35):
            net = build_delta_net(e, delta)
            worst = certify_covering(net, 1000, np.random.default_rng(2))
            assert worst <= delta

    def test_coarse_net_on_small_class(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        delta = 0.999
        net = build_delta_net(e, delta, certify=True, rng=np.random.default_rng(0))
        assert net.count >= 1

    def test_monotone_in_delta(self):
        e = ellipsoid_1d(s=2.0, L=1.0)
        counts, Ms = [], []
        for delta in (0.8, 0.4, 0.2):
            net = build_delta_net(e, delta)
            counts.append(net.count)
            Ms.append(net.M)
        assert counts == sorted(counts) and Ms == sorted(Ms)

    def test_cap_raises_with_suggestion(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        with pytest.raises(NetTooLargeError) as exc:
            build_delta_net(e, 0.05, cap=10_000)
        assert exc.value.suggested_delta is None or exc.value.suggested_delta > 0.05

    def test_summary_bounds_bracket_exact_count(self):
        e = ellipsoid_1d(s=2.0, L=1.0)
        for delta in (0.7, 0.4, 0.25):
            exact = build_delta_net(e, delta)
            summary = build_delta_net(e, delta, materialize=False)
            assert summary.log_count_lo <= math.log(exact.count) <= summary.log_count_hi

    def test_cardinality_bound_with_reported_constant(self):
        # log #points <= C delta^(-1/s) log(1/delta) with the builder's own
        # constant C, and C stays bounded as delta shrinks
        e = ellipsoid_1d(s=2.0, L=1.0)
        consts = []
        for delta in (0.7, 0.5, 0.35, 0.25):
            net = build_delta_net(e, delta)
            C = net.cardinality_constant()
            scale = delta ** (-1.0 / e.s) * max(math.log(1.0 / delta), 1.0)
            assert math.log(net.count) <= C * scale + 1e-12
            consts.append(C)
        assert max(consts) <= 4.0 * min(consts)

    def test_sampled_points_are_net_points(self):
        e = ellipsoid_1d(s=2.0, L=1.0)
        net = build_delta_net(e, 0.4)
        summary = build_delta_net(e, 0.4, materialize=False)
        pts = summary.sample_points(200, np.random.default_rng(1))
        # each sampled point must coincide with a materialized net point
        d2 = ((pts[:, None, :] - net.points[None, :, :]) ** 2).sum(axis=2)
        assert d2.min(axis=1).max() < 1e-24


class TestCardinalityExponent:
    def test_slope_s1(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        slope, _, _ = net_cardinality_exponent(e, [0.4, 0.2, 0.1, 0.05])
        assert abs(slope - 1.0) < 0.35

    def test_slope_s2(self):
        e = ellipsoid_1d(s=2.0, L=1.0)
        slope, _, _ = net_cardinality_exponent(e, [0.4, 0.2, 0.1, 0.05])
        assert abs(slope - 0.5) < 0.35

    def test_degenerate_rejected(self):
        e = ellipsoid_1d()
        with pytest.raises(ConfigError):
            net_cardinality_exponent(e, [0.4, 0.4, 0.4, 0.4])


def exhaustive_greedy_count(m, dmin):
    """Oracle: greedy over all 2^m words in lexicographic order."""
    kept = []
    for code in range(2**m):
        word = [(code >> i) & 1 for i in range(m)]
        if all(sum(a != b for a, b in zip(word, w)) >= dmin for w in kept):
            kept.append(word)
    return len(kept)


class TestPackingSet:
    def test_varshamov_gilbert_bound_small_shells(self):
        # build at deltas giving shell sizes up to ~20 and compare with the
        # exhaustive-greedy oracle bound 2^(m/8)
        e = ellipsoid_1d(s=1.0, L=1.0)
        for delta in (0.6, 0.3, 0.15):
            p = build_packing_set(e, delta)
            m = len(p.shell)
            assert len(p) >= 2 ** (m / 8.0)
            if m <= 14:
                dmin = max(1, math.ceil(m / 4))
                assert exhaustive_greedy_count(m, dmin) >= 2 ** (m / 8.0)

    def test_pairwise_separation_exhaustive(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        p = build_packing_set(e, 0.2)
        dmin, dmax = p.pairwise_distance_bounds()
        assert dmin >= p.C0 * p.delta - 1e-12
        assert dmax <= p.C_upper * p.delta + 1e-12
        assert p.C_upper * p.delta <= p.delta + 1e-12  # klassu upper bound

    def test_points_inside_ellipsoid_zero_base(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        p = build_packing_set(e, 0.25)
        a = e.weights_array(p.support)
        wnorm = (p.points**2 * a**2).sum(axis=1)
        assert wnorm.max() <= e.L**2 + 1e-12

    def test_base_point_respected(self):
        e = ellipsoid_1d(s=1.0, L=2.0)
        base = CoefficientVector({MultiIndex((1,), (0,)): 0.5}, e.space.tag)
        p = build_packing_set(e, 0.3, base=base)
        a = e.weights_array(p.support)
        wnorm = (p.points**2 * a**2).sum(axis=1)
        assert wnorm.max() <= e.L**2 + 1e-12
        assert np.allclose(p.points[0], base.to_array(p.support))

    def test_interior_base_required(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        bad = CoefficientVector({MultiIndex((1,), (0,)): 1.0}, e.space.tag)
        with pytest.raises(ConfigError):
            build_packing_set(e, 0.3, base=bad)

    def test_degenerate_delta_rejected(self):
        e = ellipsoid_1d(s=1.0, L=1.0)
        with pytest.raises(ConfigError, match="degenerates"):
            build_packing_set(e, 1.5)

    def test_tiny_shell_reports_feasible_delta(self):
        from erminv.indexing import AxisCosSpace

        # single-axis family: M = 1 leaves a one-index shell
        e = Ellipsoid(AxisCosSpace(0, 1), s=1.0, L=1.0)
        with pytest.raises(ConfigError, match="delta <="):
            build_packing_set(e, 0.9)


class TestSerializationRoundTrip:
    def test_net_points_bit_exact(self):
        from erminv.serialize import points_from_text, points_to_text

        e = ellipsoid_1d(s=2.0, L=1.0)
        net = build_delta_net(e, 0.5)
        vecs = net.point_vectors()
        text = points_to_text(vecs, net.delta, net.M)
        back, delta, M, count = points_from_text(text, e.space.tag)
        assert delta == net.delta and M == net.M and count == net.count
        for a, b in zip(vecs, back):
            assert a.entries == b.entries

    def test_packing_round_trip(self):
        from erminv.serialize import points_from_text, points_to_text

        e = ellipsoid_1d(s=1.0, L=1.0)
        p = build_packing_set(e, 0.3)
        vecs = p.point_vectors()
        text = points_to_text(vecs, p.delta, p.M)
        back, _, _, _ = points_from_text(text, e.space.tag)
        for a, b in zip(vecs, back):
            assert a.entries == b.entries
