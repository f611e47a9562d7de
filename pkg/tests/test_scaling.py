from __future__ import annotations

import math
from fractions import Fraction

import pytest

from ncs import arch, scaling
from ncs.errors import DomainError

B0_MBCONV_REPEATS = (1, 2, 2, 3, 3, 4, 1)


class TestDepthLadder:
    def test_canonical_ladder(self):
        coeffs, totals = scaling.derive_depth_ladder(B0_MBCONV_REPEATS, 4)
        assert coeffs == [Fraction(1), Fraction(7, 10), Fraction(3, 5), Fraction(1, 2)]
        assert totals == [18, 17, 15, 12]

    def test_each_step_is_smallest_strict_reduction(self):
        # the defining property, checked without reusing the search code
        coeffs, totals = scaling.derive_depth_ladder(B0_MBCONV_REPEATS, 6)
        for (d_prev, t_prev), (d_next, t_next) in zip(zip(coeffs, totals), zip(coeffs[1:], totals[1:])):
            steps = (d_prev - d_next) / Fraction(1, 10)
            assert steps.denominator == 1 and steps >= 1
            assert t_next < t_prev
            for y in range(1, int(steps)):
                d_between = d_prev - y * Fraction(1, 10)
                assert scaling.operator_total(B0_MBCONV_REPEATS, d_between, 2) >= t_prev

    def test_exhaustion_truncates(self):
        # beyond d=0.2 no positive step still reduces the total
        coeffs, totals = scaling.derive_depth_ladder(B0_MBCONV_REPEATS, 10)
        assert len(coeffs) == 6
        assert coeffs[-1] == Fraction(1, 5)
        assert totals == [18, 17, 15, 12, 10, 9]

    def test_all_single_repeats_cannot_reduce(self):
        coeffs, totals = scaling.derive_depth_ladder((1, 1, 1), 4)
        assert coeffs == [Fraction(1)]
        assert totals == [5]

    def test_errors(self):
        with pytest.raises(DomainError):
            scaling.derive_depth_ladder(B0_MBCONV_REPEATS, 0)
        with pytest.raises(DomainError):
            scaling.derive_depth_ladder((), 4)
        with pytest.raises(DomainError):
            scaling.derive_depth_ladder((1, 0), 4)


class TestWidthResolutionLadder:
    def test_exact_fractions(self):
        widths, resolutions = scaling.derive_wr_ladder([18, 17, 15, 12])
        # chained by hand: w2 = 11/12 * 17/18 = 187/216,
        # w3 = 187/216 * 11/12 * 15/17 = 605/864,
        # w4 = 605/864 * 11/12 * 12/15 = 1331/2592
        assert widths == [Fraction(1), Fraction(187, 216), Fraction(605, 864), Fraction(1331, 2592)]
        # r2 = 23/24 * 17/18 = 391/432, then chained the same way
        assert resolutions[0] == Fraction(1)
        assert resolutions[1] == Fraction(391, 432)
        assert resolutions[2] == resolutions[1] * Fraction(23, 24) * Fraction(15, 17)
        assert resolutions[3] == resolutions[2] * Fraction(23, 24) * Fraction(12, 15)

    def test_four_decimal_values(self):
        widths, resolutions = scaling.derive_wr_ladder([18, 17, 15, 12])
        assert [round(float(w), 4) for w in widths] == [1.0, 0.8657, 0.7002, 0.5135]
        assert [round(float(r), 4) for r in resolutions] == [1.0, 0.9051, 0.7653, 0.5868]

    def test_chaining_identity(self):
        # w[i+1]/w[i] divided by t-ratio is always exactly 11/12, and 23/24 for r
        widths, resolutions = scaling.derive_wr_ladder([18, 17, 15, 12])
        for u in range(3):
            t_ratio = Fraction([18, 17, 15, 12][u + 1], [18, 17, 15, 12][u])
            assert widths[u + 1] / widths[u] / t_ratio == Fraction(11, 12)
            assert resolutions[u + 1] / resolutions[u] / t_ratio == Fraction(23, 24)

    def test_totals_must_strictly_decrease(self):
        with pytest.raises(DomainError, match="strictly decrease"):
            scaling.derive_wr_ladder([18, 18, 15])
        with pytest.raises(DomainError, match="strictly decrease"):
            scaling.derive_wr_ladder([18, 19])

    def test_errors(self):
        with pytest.raises(DomainError):
            scaling.derive_wr_ladder([])
        with pytest.raises(DomainError):
            scaling.derive_wr_ladder([18, 0])


class TestResolutions:
    def test_base_224(self):
        _, res_coeffs = scaling.derive_wr_ladder([18, 17, 15, 12])
        assert scaling.resolutions_from_coeffs(res_coeffs, 224) == [224, 203, 172, 132]

    def test_base_256(self):
        _, res_coeffs = scaling.derive_wr_ladder([18, 17, 15, 12])
        assert scaling.resolutions_from_coeffs(res_coeffs, 256) == [256, 232, 196, 151]

    def test_ceiling_never_half_up(self):
        # 224 * 0.586757 = 131.43, plain rounding would say 131
        _, res_coeffs = scaling.derive_wr_ladder([18, 17, 15, 12])
        assert math.floor(224 * res_coeffs[3]) == 131
        assert scaling.resolutions_from_coeffs(res_coeffs, 224)[3] == 132

    def test_errors(self):
        with pytest.raises(DomainError):
            scaling.resolutions_from_coeffs([Fraction(1)], 0)
        with pytest.raises(DomainError):
            scaling.resolutions_from_coeffs([Fraction(3, 2)], 224)


class TestDeriveLadder:
    def test_full_ladder(self):
        ladder = scaling.derive_ladder()
        assert ladder.size == 4
        assert not ladder.truncated
        assert ladder.operator_totals == (18, 17, 15, 12)
        assert ladder.resolutions == (224, 203, 172, 132)
        assert ladder.depth_coeffs[1] == Fraction(7, 10)
        assert ladder.width_coeffs[3] == Fraction(1331, 2592)

    def test_truncated_flag(self):
        ladder = scaling.derive_ladder(max_index=10)
        assert ladder.truncated
        assert ladder.size == 6
        assert len(ladder.resolutions) == 6

    def test_custom_base(self):
        small = arch.baseline_b0(input_resolution=320)
        ladder = scaling.derive_ladder(base_resolution=320, base=small)
        assert ladder.resolutions[0] == 320

    def test_rows_rendering(self):
        rows = scaling.ladder_rows(scaling.derive_ladder())
        assert rows[1] == {"index": 2, "d": 0.7, "t": 17, "w": 0.8657, "r": 0.9051, "resolution": 203}
        assert rows[3]["w"] == 0.5135

    def test_dict_shape(self):
        doc = scaling.ladder_to_dict(scaling.derive_ladder())
        assert doc["max_index"] == 4
        assert doc["base_resolution"] == 224
        assert doc["truncated"] is False
        assert len(doc["rungs"]) == 4

    def test_determinism(self):
        assert scaling.derive_ladder() == scaling.derive_ladder()
