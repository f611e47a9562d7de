from __future__ import annotations

import json
import math
from dataclasses import replace

import pytest

from ncs import arch, pool, scaling
from ncs.cost import cost
from ncs.errors import ConfigError, DomainError


@pytest.fixture(scope="module")
def ladder():
    return scaling.derive_ladder()


@pytest.fixture(scope="module")
def standard_pool(ladder):
    return pool.generate_pool(ladder)


@pytest.fixture(scope="module")
def standardized(standard_pool):
    return pool.standardize(standard_pool)


class TestGeneratePool:
    def test_size_and_order(self, standard_pool):
        assert len(standard_pool) == 64
        assert standard_pool[0].id == "w1_d1_r1"
        assert standard_pool[1].id == "w1_d1_r2"
        assert standard_pool[4].id == "w1_d2_r1"
        assert standard_pool[-1].id == "w4_d4_r4"

    def test_ids_match_indices(self, standard_pool):
        for c in standard_pool:
            assert c.id == f"w{c.w_index}_d{c.d_index}_r{c.r_index}"
            assert c.hf_resolution is None

    def test_baseline_is_included(self, standard_pool):
        first = standard_pool[0]
        b0 = cost(arch.baseline_b0())
        assert first.params == b0.params
        assert first.macs == b0.macs

    def test_resolutions_follow_the_ladder(self, standard_pool, ladder):
        for c in standard_pool:
            assert c.arch.input_resolution == ladder.resolutions[c.r_index - 1]

    def test_costs_match_direct_costing(self, standard_pool):
        some = [standard_pool[i] for i in (0, 7, 21, 42, 63)]
        for c in some:
            report = cost(c.arch)
            assert (c.params, c.macs) == (report.params, report.macs)

    def test_names(self, standard_pool):
        assert standard_pool[0].arch.name == "Model(w1,d1,r1)"
        assert standard_pool[-1].arch.name == "Model(w4,d4,r4)"

    def test_single_rung_pool(self):
        one = scaling.derive_ladder(max_index=1)
        only = pool.generate_pool(one)
        assert [c.id for c in only] == ["w1_d1_r1"]


class TestHfPool:
    def test_size_ids_and_power_of_two(self, ladder):
        hf = pool.generate_pool(ladder, hf=True)
        assert len(hf) == 32
        assert hf[0].id == "hf_w1_d1_r128"
        assert hf[1].id == "hf_w1_d1_r256"
        for c in hf:
            assert c.hf_resolution in (128, 256)
            assert c.arch.input_resolution == c.hf_resolution
            for s in c.arch.stages:
                assert s.out_channels & (s.out_channels - 1) == 0

    def test_custom_resolutions(self, ladder):
        hf = pool.generate_pool(ladder, hf=True, hf_resolutions=(64,))
        assert len(hf) == 16
        assert all(c.arch.input_resolution == 64 for c in hf)


class TestStandardize:
    def test_stats(self, standardized):
        _, stats = standardized
        assert stats.n == 64
        # mean is an exact dyadic rational: sum 196,133,136 / 64
        assert stats.params_mean == 196_133_136 / 64
        assert stats.macs_mean == 10_646_450_944 / 64
        assert stats.params_sd == pytest.approx(1_186_281.88, rel=1e-6)
        assert stats.macs_sd == pytest.approx(88_537_269.71, rel=1e-6)

    def test_population_not_sample_sd(self, standardized):
        std, stats = standardized
        n = stats.n
        var = sum((c.params - stats.params_mean) ** 2 for c in std) / n
        assert stats.params_sd == pytest.approx(math.sqrt(var), rel=1e-12)

    def test_z_sums_vanish(self, standardized):
        std, _ = standardized
        assert abs(sum(c.z_params for c in std)) < 1e-9
        assert abs(sum(c.z_macs for c in std)) < 1e-9

    def test_z_sum_is_componentwise(self, standardized):
        std, _ = standardized
        for c in std:
            assert c.z_sum == c.z_params + c.z_macs

    def test_original_pool_untouched(self, standard_pool):
        pool.standardize(standard_pool)
        assert all(c.z_sum is None for c in standard_pool)

    def test_too_small(self, standard_pool):
        with pytest.raises(DomainError, match="at least 2"):
            pool.standardize(standard_pool[:1])

    def test_degenerate_axis(self, standard_pool):
        varying = [standard_pool[i] for i in (0, 16, 32, 48)]  # across width rungs
        flat = [replace(c, params=100) for c in varying]
        with pytest.raises(DomainError, match="params axis"):
            pool.standardize(flat)
        flat = [replace(c, macs=9) for c in varying]
        with pytest.raises(DomainError, match="MACs axis"):
            pool.standardize(flat)


class TestGroup:
    def test_sizes_balanced_heaviest_first(self, standardized):
        std, _ = standardized
        groups = pool.group(std, 10)
        assert [len(g.member_ids) for g in groups] == [7, 7, 7, 7, 6, 6, 6, 6, 6, 6]
        assert [g.group_id for g in groups] == list(range(1, 11))

    def test_descending_z_sum_across_and_within(self, standardized):
        std, _ = standardized
        by_id = {c.id: c for c in std}
        groups = pool.group(std, 10)
        flat = [by_id[cid].z_sum for g in groups for cid in g.member_ids]
        assert flat == sorted(flat, reverse=True)

    def test_partition_is_exact(self, standardized):
        std, _ = standardized
        groups = pool.group(std, 10)
        seen = [cid for g in groups for cid in g.member_ids]
        assert sorted(seen) == sorted(c.id for c in std)
        assert len(seen) == len(set(seen))

    def test_tiebreak_larger_params_first(self, standardized):
        std, _ = standardized
        a = replace(std[0], id="tie_a", z_sum=0.5, params=100, macs=5)
        b = replace(std[0], id="tie_b", z_sum=0.5, params=900, macs=5)
        groups = pool.group([a, b], 1)
        assert groups[0].member_ids == ("tie_b", "tie_a")

    def test_tiebreak_then_id_ascending(self, standardized):
        std, _ = standardized
        a = replace(std[0], id="m2", z_sum=0.5, params=7, macs=5)
        b = replace(std[0], id="m1", z_sum=0.5, params=7, macs=5)
        groups = pool.group([a, b], 1)
        assert groups[0].member_ids == ("m1", "m2")

    def test_every_group_count(self, standardized):
        std, _ = standardized
        assert [len(g.member_ids) for g in pool.group(std, 64)] == [1] * 64
        assert [len(g.member_ids) for g in pool.group(std, 1)] == [64]
        assert [len(g.member_ids) for g in pool.group(std, 3)] == [22, 21, 21]

    def test_requires_standardization(self, standard_pool):
        with pytest.raises(DomainError, match="standardize before grouping"):
            pool.group(standard_pool, 4)

    def test_group_count_bounds(self, standardized):
        std, _ = standardized
        with pytest.raises(DomainError):
            pool.group(std, 0)
        with pytest.raises(DomainError):
            pool.group(std, 65)


class TestSerialization:
    def test_pool_round_trip(self, standardized, tmp_path):
        std, stats = standardized
        path = tmp_path / "pool.json"
        pool.save_pool(str(path), std, stats, {"engine_version": "x", "config_hash": "y"})
        loaded = pool.load_pool(str(path))
        assert loaded == std
        raw = json.loads(path.read_text())
        assert raw["engine_version"] == "x"
        assert raw["stats"]["n"] == 64

    def test_groups_round_trip(self, standardized, tmp_path):
        std, _ = standardized
        groups = pool.group(std, 10)
        path = tmp_path / "groups.json"
        pool.save_groups(str(path), groups)
        assert pool.load_groups(str(path)) == groups

    def test_bad_files(self, tmp_path):
        missing = tmp_path / "none.json"
        with pytest.raises(ConfigError):
            pool.load_pool(str(missing))
        bad = tmp_path / "bad.json"
        bad.write_text("[]")
        with pytest.raises(ConfigError, match="candidates"):
            pool.load_pool(str(bad))
        bad.write_text("{\"groups\": [{}]}")
        with pytest.raises(ConfigError, match="missing field"):
            pool.load_groups(str(bad))

    def test_candidate_without_z_round_trips(self, standard_pool, tmp_path):
        path = tmp_path / "raw.json"
        pool.save_pool(str(path), standard_pool[:3])
        loaded = pool.load_pool(str(path))
        assert loaded == standard_pool[:3]
        assert loaded[0].z_sum is None
