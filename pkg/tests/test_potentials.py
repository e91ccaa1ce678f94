"""Tests for torus potentials, convolution, and mediated effective potentials."""

import json
import math

import numpy as np
import pytest

from bfmix.errors import ValidationError
from bfmix.potentials import (
    FOURIER_FACTOR,
    EffectivePotential,
    FourierPotential,
    convolve,
    coupling_scale,
    effective_potential_kF,
    effective_potential_limit,
    from_coefficients,
    from_radial_profile,
    linear_combination,
    load_fourier,
    lp_norm,
    norms,
    save_fourier,
    stability_weight,
    sup_difference,
    zero_potential,
)
from bfmix.scattering import RadialProfile
from bfmix.util import rng

# Frozen oracles for the single-mode potential c at modes +-e1:
#   V(x) = (2 pi)^{-3/2} * 2 c cos(x1)
#   (V*V)(x) = 2 c^2 cos(x1) pointwise; coefficient (2 pi)^{3/2} c^2 at +-e1
#   mediated at unit Fermi momentum: d1(e1, 1) = 13/3 gives
#   value at zero 13 c^2 / (3 pi).
C = 0.8
D1_OVER_2PI = 13.0 / (6.0 * math.pi)


def single_mode(c: float = C) -> FourierPotential:
    return from_coefficients([((1, 0, 0), c)], cutoff=1, label="single")


def random_sparse(seed_index: int, cutoff: int = 3, n_modes: int = 6) -> FourierPotential:
    gen = rng(2024, seed_index)
    entries = {}
    for _ in range(n_modes):
        k = tuple(int(x) for x in gen.integers(-cutoff, cutoff + 1, size=3))
        entries[k] = float(gen.normal())
    return from_coefficients(list(entries.items()), cutoff)


class TestFromCoefficients:
    def test_symmetrization(self):
        v = single_mode()
        assert v.coefficient((1, 0, 0)) == C
        assert v.coefficient((-1, 0, 0)) == C
        assert v.coefficient((0, 1, 0)) == 0.0

    def test_empty_is_zero(self):
        assert from_coefficients([], cutoff=2).is_zero()
        assert zero_potential().is_zero()

    def test_asymmetric_conflict(self):
        with pytest.raises(ValidationError):
            from_coefficients([((1, 0, 0), 1.0), ((-1, 0, 0), 3.0)], cutoff=1)

    def test_near_symmetric_averaged(self):
        v = from_coefficients([((1, 0, 0), 1.0), ((-1, 0, 0), 1.0 + 5e-13)], cutoff=1)
        assert v.coefficient((1, 0, 0)) == pytest.approx(1.0 + 2.5e-13, abs=1e-15)
        assert v.coefficient((1, 0, 0)) == v.coefficient((-1, 0, 0))

    def test_cutoff_is_max_norm(self):
        v = from_coefficients([((2, 2, 2), 1.0)], cutoff=2)
        assert v.coefficient((2, 2, 2)) == 1.0
        with pytest.raises(ValidationError):
            from_coefficients([((3, 0, 0), 1.0)], cutoff=2)

    def test_repeated_entry_conflict(self):
        with pytest.raises(ValidationError):
            from_coefficients([((1, 0, 0), 1.0), ((1, 0, 0), 2.0)], cutoff=1)

    def test_non_integer_mode_rejected(self):
        with pytest.raises(ValidationError):
            from_coefficients([((0.5, 0, 0), 1.0)], cutoff=1)


class TestEvaluation:
    def test_single_mode_values(self):
        v = single_mode()
        assert v.value((0.0, 0.0, 0.0)) == pytest.approx(2 * C / FOURIER_FACTOR, rel=1e-14)
        assert v.value((math.pi / 2, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_grid_matches_pointwise(self):
        v = random_sparse(11)
        n = 8
        grid = v.grid_values(n)
        xs = 2.0 * math.pi * np.arange(n) / n
        for idx in ((0, 0, 0), (1, 2, 3), (7, 5, 2)):
            x = (xs[idx[0]], xs[idx[1]], xs[idx[2]])
            assert grid[idx] == pytest.approx(v.value(x), rel=1e-12, abs=1e-13)

    def test_grid_aliasing_guard(self):
        with pytest.raises(ValidationError):
            random_sparse(12, cutoff=3).grid_values(6)


class TestConvolve:
    def test_single_mode_series(self):
        v = single_mode()
        vv = convolve(v, v)
        assert vv.coefficient((1, 0, 0)) == pytest.approx(FOURIER_FACTOR * C * C, rel=1e-14)
        assert vv.value((0.0, 0.0, 0.0)) == pytest.approx(2 * C * C, rel=1e-14)
        assert vv.value((math.pi, 0.0, 0.0)) == pytest.approx(-2 * C * C, rel=1e-14)

    def test_zero_factor(self):
        assert convolve(single_mode(), zero_potential(1)).is_zero()

    def test_value_at_zero_is_plancherel(self):
        v = random_sparse(21)
        vv = convolve(v, v)
        assert vv.value((0.0, 0.0, 0.0)) == pytest.approx(v.squared_l2(), rel=1e-12)

    def test_convolution_theorem_against_grid(self):
        # independent oracle: position-space convolution by FFT quadrature
        for idx in range(3):
            v = random_sparse(30 + idx, cutoff=2, n_modes=5)
            u = random_sparse(40 + idx, cutoff=2, n_modes=5)
            n = 16
            vg, ug = v.grid_values(n), u.grid_values(n)
            cell = (2.0 * math.pi / n) ** 3
            conv_grid = np.real(np.fft.ifftn(np.fft.fftn(vg) * np.fft.fftn(ug))) * cell
            direct = convolve(v, u).grid_values(n)
            np.testing.assert_allclose(direct, conv_grid, rtol=1e-10, atol=1e-12)


class TestRadialImport:
    def test_ball_closed_form(self):
        ball = RadialProfile.step(1.0, 1.0)
        p = from_radial_profile(ball, n_scale=2, g=1.5, cutoff=2)
        for k in ((1, 0, 0), (1, 1, 0), (2, 1, 2)):
            rho = math.sqrt(sum(c * c for c in k)) / 2.0
            exact = 1.5 * (4 * math.pi / rho**3) * (math.sin(rho) - rho * math.cos(rho))
            assert p.coefficient(k) == pytest.approx(exact / FOURIER_FACTOR, rel=1e-12)

    def test_zero_mode_scale_free(self):
        ball = RadialProfile.step(2.0, 0.75)
        expect = 2.0 * 4.0 * math.pi * 0.75**3 / 3.0 / FOURIER_FACTOR
        for n_scale in (1, 2, 5):
            p = from_radial_profile(ball, n_scale=n_scale, g=1.0, cutoff=1)
            assert p.coefficient((0, 0, 0)) == pytest.approx(expect, rel=1e-12)

    def test_linear_in_g(self):
        ball = RadialProfile.step(1.0, 1.0)
        p1 = from_radial_profile(ball, n_scale=2, g=0.7, cutoff=2)
        p2 = from_radial_profile(ball, n_scale=2, g=1.4, cutoff=2)
        for k in p1.modes():
            assert p2.coefficient(k) == pytest.approx(2.0 * p1.coefficient(k), rel=1e-13)

    def test_zero_coupling(self):
        assert from_radial_profile(RadialProfile.step(1.0, 1.0), 1, 0.0, 3).is_zero()

    def test_large_scale_limit(self):
        # fixed k: coefficient -> (2 pi)^{-3/2} g int v as the scale grows
        ball = RadialProfile.step(1.0, 1.0)
        target = 4.0 * math.pi / 3.0 / FOURIER_FACTOR
        deviations = []
        for n_scale in (2, 8, 32):
            p = from_radial_profile(ball, n_scale=n_scale, g=1.0, cutoff=1)
            deviations.append(abs(p.coefficient((1, 1, 1)) - target))
        assert deviations[2] < deviations[1] < deviations[0]
        assert deviations[2] < 1e-3

    def test_periodization_overlap(self):
        with pytest.raises(ValidationError):
            from_radial_profile(RadialProfile.step(1.0, math.pi), 1, 1.0, 1)


class TestEffectivePotential:
    def test_single_mode_unit_sea(self):
        eff = effective_potential_kF(single_mode(), 1)
        assert eff.at_zero == pytest.approx(13 * C * C / (3 * math.pi), rel=1e-13)
        # cosine profile: value at x1 = pi is the negative of the value at 0
        assert eff.base.value((math.pi, 0, 0)) == pytest.approx(-eff.at_zero, rel=1e-13)
        assert eff.coefficient((0, 0, 0)) == 0.0
        assert eff.kf2 == 1

    def test_zero_potential(self):
        eff = effective_potential_kF(zero_potential(2), 4)
        assert eff.base.is_zero()
        assert eff.at_zero == 0.0

    def test_zero_mode_always_dropped(self):
        v = from_coefficients([((0, 0, 0), 3.0), ((1, 1, 0), 1.0)], cutoff=1)
        eff = effective_potential_kF(v, 2)
        assert eff.coefficient((0, 0, 0)) == 0.0
        assert eff.coefficient((1, 1, 0)) != 0.0

    def test_limit_object(self):
        w = from_coefficients([((1, 0, 0), 2.0), ((1, 1, 0), 0.5)], cutoff=1, label="W")
        v = single_mode()
        eff = effective_potential_limit(w, v)
        assert eff.kf2 is None
        assert eff.coefficient((1, 0, 0)) == pytest.approx(2.0 - FOURIER_FACTOR * C * C, rel=1e-14)
        assert eff.coefficient((1, 1, 0)) == 0.5

    def test_linf_envelope_tracks_h2(self):
        # ||W_sea||_inf <= C ||V||^2_{H^2}. Two layers: the crude constant
        # C = 1 holds outright (the per-mode sea ratios stay well below 1 and
        # the H^2 weights only help); and on populated seas (kf2 >= 9, where
        # the per-mode ratios have stopped swinging) the constant calibrated
        # at the first sweep point with x1.5 slack covers the rest.
        for seed in (55, 56, 57):
            v = random_sparse(seed, cutoff=2, n_modes=4)
            h2 = v.h_norm_squared(2)
            ratios = []
            for kf2 in (9, 16, 25, 36):
                eff = effective_potential_kF(v, kf2)
                linf = float(np.max(np.abs(eff.base.grid_values(16))))
                assert linf <= h2
                ratios.append(linf / h2)
            assert all(r <= 1.5 * ratios[0] for r in ratios)


class TestSupDifference:
    def test_zero_potential(self):
        sd = sup_difference(zero_potential(1), 4)
        assert sd.bound == 0.0
        assert sd.grid_lower == 0.0

    def test_single_mode_closed_form(self):
        for kf2 in (1, 2, 4):
            from bfmix.lattice import resolvent_sum

            d1 = resolvent_sum(1, (1, 0, 0), kf2)
            expect = 2 * C * C * abs(d1 / (2 * math.pi * math.sqrt(kf2)) - 1.0)
            sd = sup_difference(single_mode(), kf2)
            assert sd.bound == pytest.approx(expect, rel=1e-13)
            # a single cosine mode attains its l1 bound on the grid
            assert sd.grid_lower == pytest.approx(sd.bound, rel=1e-12)

    def test_lower_bound_never_exceeds_bound(self):
        for idx in range(4):
            v = random_sparse(60 + idx, cutoff=2, n_modes=5)
            sd = sup_difference(v, 2)
            assert sd.grid_lower <= sd.bound * (1.0 + 1e-12)


class TestNorms:
    def test_single_mode_ladder(self):
        rep = norms(single_mode(), p_values=(2.0, math.inf))
        for s in range(5):
            assert rep.h_squared[s] == pytest.approx(2 * C * C * 2**s, rel=1e-14)
        assert rep.l1 == pytest.approx(2 * C, rel=1e-14)
        assert rep.lp[2.0].value == pytest.approx(math.sqrt(2) * C, rel=1e-10)
        assert rep.lp[math.inf].value == pytest.approx(2 * C / FOURIER_FACTOR, rel=1e-12)

    def test_zero_potential(self):
        rep = norms(zero_potential(), p_values=(2.0,))
        assert all(val == 0.0 for val in rep.h_squared.values())
        assert rep.l1 == 0.0
        assert rep.lp[2.0].value == 0.0

    def test_h_ladder_monotone(self):
        v = random_sparse(70)
        rep = norms(v)
        ladder = [rep.h_squared[s] for s in range(5)]
        assert all(b >= a for a, b in zip(ladder, ladder[1:]))

    def test_plancherel_grid_identity(self):
        v = random_sparse(71, cutoff=2)
        grid = v.grid_values(16)
        quad = float(np.mean(grid**2)) * (2 * math.pi) ** 3
        assert quad == pytest.approx(v.squared_l2(), rel=1e-10)

    def test_lp_validation(self):
        with pytest.raises(ValidationError):
            lp_norm(single_mode(), 1.5)
        with pytest.raises(ValidationError):
            lp_norm(single_mode(), 1.0)

    def test_stability_weight(self):
        w = single_mode(0.5)
        v = single_mode(0.3)
        p = 2.0
        expect = 1.0 + lp_norm(w, 2.0).value ** (4.0 / 1.0) + v.h_norm_squared(4)
        assert stability_weight(w, v, p) == pytest.approx(expect, rel=1e-12)


class TestLinearCombination:
    def test_combination_and_scaling(self):
        v = single_mode(1.0)
        u = from_coefficients([((0, 1, 0), 2.0)], cutoff=1)
        c = linear_combination(2.0, v, -0.5, u)
        assert c.coefficient((1, 0, 0)) == 2.0
        assert c.coefficient((0, 1, 0)) == -1.0
        assert v.scaled(0.0).is_zero()


class TestFourierIO:
    def test_roundtrip_and_order(self, tmp_path):
        v = random_sparse(80, cutoff=2)
        path = str(tmp_path / "v.json")
        save_fourier(v, path)
        w = load_fourier(path)
        assert w.coeffs == v.coeffs
        assert w.cutoff == v.cutoff
        data = json.loads(open(path).read())
        assert data["coeffs"] == sorted(data["coeffs"])

    def test_rewrite_byte_identical(self, tmp_path):
        v = random_sparse(81, cutoff=2)
        p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        save_fourier(v, p1)
        save_fourier(v, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    @pytest.mark.parametrize(
        "payload, field",
        [
            ({"type": "radial", "cutoff": 1, "coeffs": []}, "type"),
            ({"type": "fourier", "coeffs": []}, "cutoff"),
            ({"type": "fourier", "cutoff": -1, "coeffs": []}, "cutoff"),
            ({"type": "fourier", "cutoff": 1}, "coeffs"),
            ({"type": "fourier", "cutoff": 1, "coeffs": [[1, 0, 0]]}, "coeffs"),
            ({"type": "fourier", "cutoff": 1, "coeffs": [[0.5, 0, 0, 1.0]]}, "coeffs"),
        ],
    )
    def test_schema_errors_name_field(self, tmp_path, payload, field):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ValidationError, match=field):
            load_fourier(str(path))


class TestCouplingScale:
    def test_value(self):
        assert coupling_scale(3, 4) == pytest.approx(1.0 / math.sqrt(24.0 * math.pi), rel=1e-14)

    def test_validation(self):
        with pytest.raises(ValidationError):
            coupling_scale(0, 1)
        with pytest.raises(ValidationError):
            coupling_scale(1, 0)
