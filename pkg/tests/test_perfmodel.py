import numpy as np
import pytest

from lowrank_gemm import (
    ERROR_MODEL_COEFFICIENT,
    KernelKind,
    Precision,
    SpectrumSpec,
    bandwidth_limited_flops,
    builtin_profiles,
    capacity_limited_n,
    error_scale_estimate,
    extrapolate_throughput,
    fraction_of_peak,
    gemm_flops,
    gemm_traffic_bytes,
    lowrank_multiply,
    matmul_reference,
    memory_report,
    relative_error,
    synth_matrix,
    throughput_report,
    truncated_svd,
)
from lowrank_gemm.errors import RankError


class TestGemmFlopsAndTraffic:
    def test_flops_examples(self):
        assert gemm_flops(1) == 2
        assert gemm_flops(1024) == 2_147_483_648
        assert gemm_flops(20480) == 2 * 20480**3

    def test_traffic_examples(self):
        assert gemm_traffic_bytes(1, 1) == 3
        assert gemm_traffic_bytes(20480, 1) == 3 * 20480**2
        assert gemm_traffic_bytes(20480, 4) == 4 * gemm_traffic_bytes(20480, 1)


class TestBandwidthCeiling:
    def test_reference_point_667_tflops(self):
        assert bandwidth_limited_flops(1e12, 1) == pytest.approx(666.67e12, rel=5e-4)

    def test_h200_class_bandwidth(self):
        assert bandwidth_limited_flops(4.8e12, 1) == pytest.approx(3.2e15, rel=1e-12)

    def test_halves_with_doubled_element_width(self):
        assert bandwidth_limited_flops(1e12, 2) == bandwidth_limited_flops(1e12, 1) / 2

    def test_ceiling_below_compute_peak_for_all_shipped_profiles(self):
        # The premise the selector and the projections rest on: traffic, not
        # arithmetic, binds fp8 GEMM on every shipped accelerator.
        for name in builtin_profiles().names():
            profile = builtin_profiles().get(name)
            ceiling = bandwidth_limited_flops(profile.mem_bandwidth_bytes_per_s, 1)
            assert ceiling <= profile.peak_flops[Precision.FP8]


class TestFractions:
    def test_fraction_of_compute_peak(self):
        assert fraction_of_peak(378e12, 1.321e15) == pytest.approx(0.286, abs=5e-4)

    def test_fraction_of_bandwidth_peak(self):
        assert fraction_of_peak(378e12, bandwidth_limited_flops(1e12, 1)) == pytest.approx(
            0.567, abs=5e-4
        )

    def test_self_ratio(self):
        assert fraction_of_peak(3.3e14, 3.3e14) == 1.0


class TestExtrapolation:
    def test_h200_projection(self):
        assert extrapolate_throughput(378e12, 1e12, 4.8e12) == pytest.approx(1.8144e15, rel=1e-12)

    def test_b200_projection(self):
        assert extrapolate_throughput(378e12, 1e12, 8.0e12) == pytest.approx(3.024e15, rel=1e-12)

    def test_unit_ratio_is_identity(self):
        assert extrapolate_throughput(378e12, 2.0e12, 2.0e12) == 378e12


class TestMemoryReport:
    def test_direct_at_published_size(self):
        report = memory_report(KernelKind.DIRECT_FP32, 20480, bytes_per_element=4)
        assert report.bytes_per_matrix == 20480**2 * 4 == 1_677_721_600
        assert report.total_bytes == 3 * report.bytes_per_matrix
        assert report.expansion_factor_vs_direct == 1.0

    def test_factorized_element_count_formula(self):
        report = memory_report(KernelKind.LOWRANK_FP8, 20480, rank=512, bytes_per_element=1)
        assert report.bytes_per_matrix == 20480 * 512 + 512 + 512 * 20480 == 20_972_032

    def test_expansion_factor_four_at_rank_n_over_8(self):
        report = memory_report(KernelKind.LOWRANK_FP8, 20480, rank=2560, bytes_per_element=1)
        assert report.expansion_factor_vs_direct == pytest.approx(4.0, abs=1e-3)

    def test_expansion_invariant_to_element_width(self):
        one = memory_report(KernelKind.LOWRANK_FP8, 4096, rank=256, bytes_per_element=1)
        four = memory_report(KernelKind.LOWRANK_FP8, 4096, rank=256, bytes_per_element=4)
        assert one.expansion_factor_vs_direct == four.expansion_factor_vs_direct

    def test_total_is_three_matrices(self):
        for kind, rank in ((KernelKind.DIRECT_FP16, None), (KernelKind.LOWRANK_AUTO, 7)):
            report = memory_report(kind, 100, rank=rank, bytes_per_element=2)
            assert report.total_bytes == 3 * report.bytes_per_matrix

    def test_workspace_multiplier_scales_both_sides(self):
        plain = memory_report(KernelKind.LOWRANK_FP8, 1024, rank=64, bytes_per_element=1)
        inflated = memory_report(
            KernelKind.LOWRANK_FP8, 1024, rank=64, bytes_per_element=1, workspace_multiplier=3.0
        )
        assert inflated.bytes_per_matrix == 3 * plain.bytes_per_matrix
        assert inflated.expansion_factor_vs_direct == pytest.approx(
            plain.expansion_factor_vs_direct, rel=1e-12
        )

    def test_lowrank_requires_rank(self):
        with pytest.raises(RankError):
            memory_report(KernelKind.LOWRANK_FP8, 64)


class TestErrorScaleEstimate:
    def test_full_rank_is_model_minimum(self):
        assert error_scale_estimate(256, 256) == ERROR_MODEL_COEFFICIENT

    def test_sqrt_ratio(self):
        a = error_scale_estimate(4096, 1024)
        b = error_scale_estimate(4096, 256)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_rank_cannot_exceed_size(self):
        with pytest.raises(ValueError):
            error_scale_estimate(16, 17)

    def test_calibrated_within_3x_of_measured_suite_error(self):
        # Measure the (128, 16) operating point of the default suite family
        # and hold the frozen model coefficient to within 3x.
        n, r = 128, 16
        sv = (1.0,) * 8 + (2e-3,) * 120
        errors = []
        for seed in range(4):
            a = synth_matrix(SpectrumSpec(n, n, sv, 300 + seed))
            b = synth_matrix(SpectrumSpec(n, n, sv, 400 + seed))
            product = lowrank_multiply(truncated_svd(a, r), truncated_svd(b, r))
            errors.append(relative_error(product, matmul_reference(a, b)))
        measured = float(np.mean(errors))
        model = error_scale_estimate(n, r)
        assert model / 3 <= measured <= model * 3


class TestThroughputReport:
    def test_shipped_baseline_numbers(self):
        report = throughput_report(builtin_profiles().get("rtx4090"))
        assert report.compute_peak_flops == 1.321e15
        assert report.fraction_of_compute_peak == pytest.approx(0.286, abs=5e-4)
        assert report.fraction_of_bandwidth_peak == pytest.approx(0.567, abs=5e-4)

    def test_measured_cannot_exceed_compute_peak(self):
        with pytest.raises(ValueError):
            throughput_report(builtin_profiles().get("rtx4090"), measured_flops=2e15)


class TestCapacityLimitedN:
    def test_monotone_in_capacity(self):
        reg = builtin_profiles()
        ns = [capacity_limited_n(reg.get(name)) for name in ("rtx4090", "h200", "b200")]
        assert ns == sorted(ns)
        assert all(n > 20480 for n in ns)

    def test_inverts_direct_memory_report(self):
        profile = builtin_profiles().get("rtx4090")
        n = capacity_limited_n(profile, bytes_per_element=4)
        assert memory_report(KernelKind.DIRECT_FP32, n, bytes_per_element=4).total_bytes <= (
            profile.memory_capacity_bytes
        )
        assert memory_report(KernelKind.DIRECT_FP32, n + 1, bytes_per_element=4).total_bytes > (
            profile.memory_capacity_bytes
        )
