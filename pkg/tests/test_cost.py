from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import pytest

from ncs import arch
from ncs.arch import ArchDescriptor, Coeffs, StageSpec
from ncs.cost import CONVENTION_NOTE, cost, cost_batch, report_to_dict, se_channels
from ncs.errors import StructureError


def _stem(out_c: int = 8, kernel: int = 3, stride: int = 2) -> StageSpec:
    return StageSpec(1, arch.STEM, kernel, 0, stride, out_c, 1, 0.0)


def _desc(stages, resolution=32, classes=10, name="tiny") -> ArchDescriptor:
    return ArchDescriptor(name, resolution, classes, Coeffs(), tuple(stages))


class TestTinyFixtures:
    def test_stem_only(self):
        # conv 3x3, 3->8, stride 2 at side 32 -> 16x16 map
        # params: 3*3*3*8 + 2*8 (bn) = 232
        # macs:   16*16*8 * 9*3    = 55,296
        report = cost(_desc([_stem()]))
        assert report.params == 232
        assert report.macs == 55_296
        assert report.stages[0].output_resolution == 16

    def test_stem_plus_expansion1_block(self):
        # adds an mbconv: e=1 k3 s1 8->8 with se 0.25 at side 16
        # depthwise: 9*8+16 = 88 params, 16*16*8*9 = 18,432 macs
        # se (squeeze to max(1, 8//4) = 2): pool 2048, convs 18+24 params,
        #   16+16 macs, rescale 2048
        # project 8->8: 64+16 params, 16*16*8*8 = 16,384 macs
        # block: 210 params, 38,944 macs
        block = StageSpec(2, arch.MBCONV, 3, 1, 1, 8, 1, 0.25)
        report = cost(_desc([_stem(), block]))
        assert report.params == 232 + 210 == 442
        assert report.macs == 55_296 + 38_944 == 94_240

    def test_two_repeat_expansion6_block_with_head(self):
        # stem 3->8 (side 32->16), then mbconv e=6 k5 s2 8->16 x2, head 16->32, 10 classes
        # first block (8->16, side 16->8): expand 480p/98,304m, dw 1296p/76,800m,
        #   se(sq=2) 242p/6336m, project 800p/49,152m          = 2,818p / 230,592m
        # second block (16->16, side 8): expand 1728p/98,304m, dw 2592p/153,600m,
        #   se(sq=4) 868p/13,056m, project 1568p/98,304m       = 6,756p / 363,264m
        # head: conv 576p/32,768m + pool 2048m + fc 330p/320m  = 906p / 35,136m
        stages = [
            _stem(),
            StageSpec(2, arch.MBCONV, 5, 6, 2, 16, 2, 0.25),
            StageSpec(3, arch.HEAD, 1, 0, 1, 32, 1, 0.0),
        ]
        report = cost(_desc(stages))
        assert [s.params for s in report.stages] == [232, 2_818 + 6_756, 906]
        assert [s.macs for s in report.stages] == [55_296, 230_592 + 363_264, 35_136]
        assert report.params == 10_712
        assert report.macs == 684_288

    def test_num_classes_only_touches_head(self):
        stages = [
            _stem(),
            StageSpec(2, arch.MBCONV, 5, 6, 2, 16, 2, 0.25),
            StageSpec(3, arch.HEAD, 1, 0, 1, 32, 1, 0.0),
        ]
        ten = cost(_desc(stages, classes=10))
        hundred = cost(_desc(stages, classes=100))
        # fc grows by (32 weights + 1 bias) per extra class, macs by 32
        assert hundred.params - ten.params == 90 * 33
        assert hundred.macs - ten.macs == 90 * 32
        assert hundred.stages[0].params == ten.stages[0].params


class TestSqueezeChannels:
    def test_floor_of_input_fraction(self):
        assert se_channels(32, 0.25) == 8
        assert se_channels(8, 0.25) == 2
        assert se_channels(40, 0.25) == 10

    def test_floor_one(self):
        assert se_channels(2, 0.25) == 1
        assert se_channels(1, 0.25) == 1


class TestBaselineNumbers:
    def test_stem_at_224(self):
        report = cost(arch.baseline_b0())
        assert report.stages[0].params == 928  # 27*32 + 64
        assert report.stages[0].macs == 10_838_016  # 112*112*32*27

    def test_first_mbconv_stage(self):
        report = cost(arch.baseline_b0())
        assert report.stages[1].params == 1_448

    def test_head_stage(self):
        # conv 320->1280: 409,600 + 2,560 bn; fc: 1,280,000 + 1,000
        # macs: 7*7*1280*320 + pool 7*7*1280 + fc 1,280,000
        report = cost(arch.baseline_b0())
        assert report.stages[-1].params == 1_693_160
        assert report.stages[-1].macs == 20_070_400 + 62_720 + 1_280_000

    def test_totals(self):
        report = cost(arch.baseline_b0())
        assert report.params == 5_288_548
        assert report.macs == 390_490_528


class TestScalingLaws:
    def test_params_do_not_depend_on_resolution(self):
        a = cost(arch.build_model(1, 1, 1))
        b = cost(arch.build_model(1, 1, Fraction(587, 1000)))
        assert a.params == b.params
        assert b.macs < a.macs

    def test_macs_shrink_roughly_quadratically_with_resolution(self):
        a = cost(arch.build_model(1, 1, 1))
        b = cost(arch.build_model(1, 1, Fraction(1, 2)))
        ratio = b.macs / a.macs
        assert 0.2 < ratio < 0.32  # ~(1/2)^2 with rounding slop

    def test_depth_and_width_both_reduce(self):
        base = cost(arch.build_model(1, 1, 1))
        thinner = cost(arch.build_model(Fraction(7, 10), 1, 1))
        shallower = cost(arch.build_model(1, Fraction(1, 2), 1))
        assert thinner.params < base.params and thinner.macs < base.macs
        assert shallower.params < base.params and shallower.macs < base.macs


class TestConventionNote:
    def test_present_in_report(self):
        report = cost(arch.baseline_b0())
        assert report.convention_note == CONVENTION_NOTE
        assert "1 MAC = 1 FLOP" in report.convention_note

    def test_present_in_dict(self):
        doc = report_to_dict(cost(arch.baseline_b0()))
        assert "1 MAC = 1 FLOP" in doc["convention_note"]
        assert "stages" not in doc
        assert "stages" in report_to_dict(cost(arch.baseline_b0()), per_stage=True)


class TestBatch:
    def test_preserves_order(self):
        models = [arch.build_model(1, 1, 1), arch.build_model(1, Fraction(1, 2), 1)]
        reports = cost_batch(models)
        assert [r.name for r in reports] == [m.name for m in models]

    def test_first_failure_names_index(self):
        good = arch.baseline_b0()
        bad = replace(good, stages=(replace(good.stages[0], stride=3),) + good.stages[1:])
        with pytest.raises(StructureError, match="batch item 1"):
            cost_batch([good, bad, good])

    def test_empty(self):
        assert cost_batch([]) == []


class TestMalformedChains:
    def test_cost_validates_first(self):
        b0 = arch.baseline_b0()
        headless_mid = replace(b0, stages=(b0.stages[0], replace(b0.stages[-1], index=2), replace(b0.stages[1], index=3)))
        with pytest.raises(StructureError, match="head stage must come last"):
            cost(headless_mid)

    def test_error_names_the_stage(self):
        b0 = arch.baseline_b0()
        bad = replace(b0, stages=b0.stages[:3] + (replace(b0.stages[3], kernel=2),) + b0.stages[4:])
        with pytest.raises(StructureError, match="stage 4"):
            cost(bad)
