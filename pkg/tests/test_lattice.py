"""Lattice-sum tests: exact oracles, symmetry invariants, line-sum formula."""

import math
from fractions import Fraction

import numpy as np
import pytest

from bfmix import lattice as lat
from bfmix.errors import CapacityError, ValidationError
from bfmix.util import rng

# Hand-computed oracles (independent of the enumeration code):
# L((1,0,0), kf2=1) = {(1,±1,0), (1,0,±1), (2,0,0)} with denominators
# {1,1,1,1,3}, so D1 = 4 + 1/3 and D2 = 4 + 1/9.
D1_E1_KF1 = Fraction(13, 3)
D2_E1_KF1 = Fraction(37, 9)
# L((1,1,0), kf2=1): denominators {2,2,2,4,4} -> D1 = 3/2 + 1/2 = 2.
D1_110_KF1 = Fraction(2)
# L((2,0,0), kf2=1): denominators {4,4,4,4,4,8} -> D1 = 5/4 + 1/8.
D1_2E1_KF1 = Fraction(11, 8)


def brute_force_lune(k, kf2, lam2=None):
    """Reference lune enumeration over a plain cube (independent path)."""
    k = np.asarray(k, dtype=np.int64)
    r = int(math.isqrt(int(kf2))) + int(np.max(np.abs(k))) + 1
    ax = np.arange(-r, r + 1)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    n2 = np.sum(pts * pts, axis=1)
    s2 = np.sum((pts - k) ** 2, axis=1)
    mask = (n2 > kf2) & (s2 <= kf2)
    if lam2 is not None:
        mask &= n2 <= lam2
    return pts[mask], (n2 - s2)[mask]


class TestFermiBall:
    def test_small_counts_and_energy(self):
        for kf2, m, e in [(1, 7, 6), (2, 19, 30), (4, 33, 78), (9, 123, 708)]:
            ball = lat.fermi_ball(kf2)
            assert ball.size == m
            assert ball.kinetic_energy == e

    def test_membership_and_order(self):
        ball = lat.fermi_ball(9)
        pts = ball.points
        assert np.all(np.sum(pts * pts, axis=1) <= 9)
        # lexicographic order, no duplicates
        as_tuples = [tuple(p) for p in pts]
        assert as_tuples == sorted(set(as_tuples))
        # negation closure
        assert set(as_tuples) == {(-a, -b, -c) for (a, b, c) in as_tuples}

    def test_rejects_small_kf2(self):
        with pytest.raises(ValidationError):
            lat.fermi_ball(0.5)
        with pytest.raises(ValidationError):
            lat.fermi_ball(0)
        with pytest.raises(ValidationError):
            lat.fermi_ball(-4)


class TestLune:
    def test_e1_points_exact(self):
        pts = lat.lune_points((1, 0, 0), 1)
        assert pts.tolist() == [[1, -1, 0], [1, 0, -1], [1, 0, 1], [1, 1, 0], [2, 0, 0]]

    def test_zero_k_empty(self):
        assert lat.lune_points((0, 0, 0), 5).shape == (0, 3)
        assert lat.resolvent_sum(1.0, (0, 0, 0), 5) == 0.0
        assert lat.lune_count((0, 0, 0), 5) == 0

    def test_matches_brute_force(self):
        gen = rng(2024, 1)
        for _ in range(25):
            k = tuple(int(c) for c in gen.integers(-3, 4, size=3))
            if k == (0, 0, 0):
                continue
            kf2 = int(gen.integers(1, 30))
            ref_pts, ref_d = brute_force_lune(k, kf2)
            got = lat.lune_points(k, kf2)
            assert sorted(map(tuple, got)) == sorted(map(tuple, ref_pts))
            assert np.all(ref_d >= 1)  # integer denominators >= 1
            assert lat.lune_count(k, kf2) == len(ref_pts)

    def test_truncation(self):
        k, kf2 = (1, 1, 0), 4
        full = lat.resolvent_sum_exact(1, k, kf2)
        lam2_cover = (math.isqrt(kf2) + 2) ** 2 + 2 * 2  # >= (k_F + |k|)^2
        assert lat.resolvent_sum_exact(1, k, kf2, lam2=lam2_cover) == full
        small = lat.resolvent_sum_exact(1, k, kf2, lam2=kf2 + 1)
        assert small <= full


class TestResolventSum:
    def test_exact_oracles(self):
        assert lat.resolvent_sum_exact(1, (1, 0, 0), 1) == D1_E1_KF1
        assert lat.resolvent_sum_exact(2, (1, 0, 0), 1) == D2_E1_KF1
        assert lat.resolvent_sum_exact(1, (1, 1, 0), 1) == D1_110_KF1
        assert lat.resolvent_sum_exact(1, (2, 0, 0), 1) == D1_2E1_KF1

    def test_float_matches_exact(self):
        gen = rng(2024, 2)
        for _ in range(20):
            k = tuple(int(c) for c in gen.integers(-2, 3, size=3))
            if k == (0, 0, 0):
                continue
            kf2 = int(gen.integers(1, 20))
            for alpha in (1, 2):
                exact = lat.resolvent_sum_exact(alpha, k, kf2)
                got = lat.resolvent_sum(float(alpha), k, kf2, table=lat.LuneSumTable())
                assert got == pytest.approx(float(exact), rel=1e-12, abs=1e-15)

    def test_signed_permutation_invariance(self):
        # raw enumeration (no canonicalization) must agree across the orbit
        base = (1, 2, 0)
        kf2 = 9
        ref, _ = lat._resolvent_sum_raw(1.0, base, kf2)
        for k in [(2, 1, 0), (0, -1, -2), (-2, 0, 1), (1, 0, -2)]:
            val, _ = lat._resolvent_sum_raw(1.0, k, kf2)
            assert val == pytest.approx(ref, rel=1e-13)

    def test_exact_capacity_cap(self):
        with pytest.raises(CapacityError):
            lat.resolvent_sum_exact(1, (1, 0, 0), 40000)

    def test_weighted_sum(self):
        coeffs = {(1, 0, 0): 0.5, (-1, 0, 0): 0.5, (0, 0, 0): 2.0, (1, 1, 0): -0.25}
        kf2 = 4
        expected = 0.0
        for k, c in coeffs.items():
            if k == (0, 0, 0):
                continue
            k2 = sum(x * x for x in k)
            expected += c * c * (1 + k2) ** 1.5 * lat.resolvent_sum(1.0, k, kf2)
        got = lat.weighted_sum(1.0, 1.5, coeffs, kf2)
        assert got == pytest.approx(expected, rel=1e-13)

    def test_joint_sums_diagonal_equals_d2(self):
        for k, kf2, lam2 in [((1, 0, 0), 1, 9), ((1, 1, 0), 2, 16), ((0, 1, 0), 4, 25)]:
            g_bb, g_cc = lat.joint_lune_sums(k, k, kf2, lam2)
            d2 = lat.resolvent_sum(2.0, k, kf2, lam2=lam2, table=lat.LuneSumTable())
            assert g_bb == pytest.approx(d2, rel=1e-12)
            assert g_cc == pytest.approx(d2, rel=1e-12)

    def test_joint_sums_brute_force(self):
        k, l, kf2, lam2 = (1, 0, 0), (0, 1, 0), 2, 16
        pts_k, d_k = brute_force_lune(k, kf2, lam2)
        # common-particle sum
        g_cc_ref = 0.0
        for p, dk in zip(pts_k, d_k):
            sl2 = np.sum((p - np.array(l)) ** 2)
            if sl2 <= kf2:
                g_cc_ref += 1.0 / (dk * (np.sum(p * p) - sl2))
        # common-hole sum
        g_bb_ref = 0.0
        ball = lat.fermi_ball(kf2).points
        for h in ball:
            pk, pl = h + np.array(k), h + np.array(l)
            nk, nl = np.sum(pk * pk), np.sum(pl * pl)
            h2 = np.sum(h * h)
            if kf2 < nk <= lam2 and kf2 < nl <= lam2:
                g_bb_ref += 1.0 / ((nk - h2) * (nl - h2))
        g_bb, g_cc = lat.joint_lune_sums(k, l, kf2, lam2)
        assert g_bb == pytest.approx(g_bb_ref, rel=1e-12)
        assert g_cc == pytest.approx(g_cc_ref, rel=1e-12)


class TestSummationFormula:
    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            lat.summation_formula((0, 0, 0), 4, 1.0)
        with pytest.raises(ValidationError):
            lat.summation_formula((2, 0, 0), 1, 1.0)  # |k| = 2 k_F

    def test_plane_index_invariants(self):
        gen = rng(2024, 3)
        for _ in range(40):
            k = tuple(int(c) for c in gen.integers(-4, 5, size=3))
            k2 = sum(c * c for c in k)
            if k2 == 0:
                continue
            kf2 = int(gen.integers(max(1, k2 // 4 + 1), 60))
            if k2 >= 4 * kf2:
                continue
            out = lat.summation_formula(k, kf2, 1.0)
            ell = out.line_density
            knorm = math.sqrt(k2)
            kf = math.sqrt(kf2)
            assert ell <= 1.0 + 1e-15
            assert ell * out.m_start > knorm / 2 - 1e-12
            assert ell * out.m_start <= knorm / 2 + ell + 1e-12
            assert ell * out.m_start - knorm / 2 >= 1 / (2 * knorm) - 1e-12
            assert kf - ell - 1e-12 <= ell * out.m_mid <= kf + 1e-12
            assert kf + knorm - ell - 1e-12 <= ell * out.m_end <= kf + knorm + 1e-12

    def test_tracks_lattice_sum(self):
        # |main + boundary - D_alpha| <= error_scale on moderate shells
        for k in [(1, 0, 0), (1, 1, 0)]:
            for kf2 in (100, 400):
                for alpha in (1.0, 2.0):
                    out = lat.summation_formula(k, kf2, alpha)
                    true = lat.resolvent_sum(alpha, k, kf2)
                    assert abs(out.approximation - true) <= out.error_scale


class TestCacheTable:
    def test_roundtrip_bit_exact(self, tmp_path):
        cache = str(tmp_path / "lunes")
        t1 = lat.LuneSumTable(cache_dir=cache)
        v1 = t1.sum(1.0, (1, 2, 0), 7)
        files = list((tmp_path / "lunes").glob("lune_*.csv"))
        assert len(files) == 1
        t2 = lat.LuneSumTable(cache_dir=cache)
        v2 = t2.sum(1.0, (1, 2, 0), 7)
        assert v1 == v2  # bit exact through repr round-trip
        # canonical aliases hit the same entry / same file
        t2.sum(1.0, (-2, 0, 1), 7)
        assert len(list((tmp_path / "lunes").glob("lune_*.csv"))) == 1

    def test_env_var_cache_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BFMIX_CACHE_DIR", str(tmp_path / "env_cache"))
        table = lat.LuneSumTable()
        table.sum(1.0, (1, 0, 0), 2)
        assert list((tmp_path / "env_cache").glob("lune_*.csv"))

    def test_count(self):
        table = lat.LuneSumTable()
        assert table.count((1, 0, 0), 1) == 5


class TestAsymptoticsReport:
    def test_structure_and_regimes(self):
        rows = lat.asymptotics_report([(1, 0, 0), (3, 0, 0)], [1, 4], table=lat.LuneSumTable())
        assert len(rows) == 4
        by_key = {(r["k"], r["kF_squared"]): r for r in rows}
        assert by_key[((1, 0, 0), 1)]["regime"] == "bulk"
        assert by_key[((3, 0, 0), 1)]["regime"] == "large_k"  # |k| = 3 >= 2 k_F = 2
        assert by_key[((3, 0, 0), 4)]["regime"] == "bulk"  # |k| = 3 < 2 k_F = 4
        bulk = by_key[((1, 0, 0), 1)]
        assert bulk["D1"] == pytest.approx(13 / 3, rel=1e-12)
        assert bulk["D2_ratio"] is not None
        large = by_key[((3, 0, 0), 1)]
        assert large["D2_ratio"] is None
        assert large["normalized_dev"] == pytest.approx(large["D1"] * 9 / 1.0)

    def test_rejects_zero_k(self):
        with pytest.raises(ValidationError):
            lat.asymptotics_report([(0, 0, 0)], [4])
