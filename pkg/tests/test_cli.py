import re

import numpy as np
import pytest

from lowrank_gemm import (
    DenseMatrix,
    EnergyThreshold,
    decompose,
    lowrank_multiply,
    matmul_reference,
    parse_csv,
    read_factors,
    read_matrix,
    write_matrix,
)
from lowrank_gemm.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION, main
from lowrank_gemm.matrices import SpectrumSpec, synth_matrix


@pytest.fixture
def dense_pair(tmp_path, rng):
    a = DenseMatrix(rng.standard_normal((12, 12)))
    b = DenseMatrix(rng.standard_normal((12, 12)))
    pa, pb = tmp_path / "a.lrgm", tmp_path / "b.lrgm"
    write_matrix(pa, a)
    write_matrix(pb, b)
    return a, b, pa, pb


class TestModelCommand:
    def test_prints_published_numbers(self, capsys):
        assert main(["model"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "666.67 TFLOPS (printed as 667)" in out
        assert "28.6%" in out
        assert "56.7%" in out
        assert re.search(r"h200 .*1\.8144", out)
        assert re.search(r"b200 .*3\.0240", out)

    def test_csv_rendition(self, tmp_path, capsys):
        out_csv = tmp_path / "model.csv"
        assert main(["model", "--out-csv", str(out_csv)]) == EXIT_OK
        lines = out_csv.read_text().splitlines()
        assert lines[0].startswith("profile,bandwidth_bytes_per_s")
        assert len(lines) == 4

    def test_unknown_profile_is_usage_error(self, capsys):
        assert main(["model", "--profile", "quantum9000"]) == EXIT_USAGE


class TestSvdAndMultiply:
    def test_svd_then_multiply_matches_library(self, tmp_path, capsys):
        n = 24
        sv = tuple((1.0,) * 2 + (1e-3,) * (n - 2))
        a = synth_matrix(SpectrumSpec(n, n, sv, seed=1))
        b = synth_matrix(SpectrumSpec(n, n, sv, seed=2))
        pa, pb = tmp_path / "a.lrgm", tmp_path / "b.lrgm"
        write_matrix(pa, a)
        write_matrix(pb, b)
        fa_path, fb_path = tmp_path / "a.lrfb", tmp_path / "b.lrfb"
        assert main(["svd", str(pa), str(fa_path), "--policy", "energy:0.99"]) == EXIT_OK
        assert main(["svd", str(pb), str(fb_path), "--policy", "energy:0.99"]) == EXIT_OK

        out_path = tmp_path / "c.lrgm"
        assert main(["multiply", str(fa_path), str(fb_path), str(out_path)]) == EXIT_OK
        produced = read_matrix(out_path).matrix
        expected = lowrank_multiply(
            decompose(a, EnergyThreshold(0.99)), decompose(b, EnergyThreshold(0.99))
        )
        assert np.array_equal(produced.data, expected.data)

    def test_svd_fixed_rank_flag(self, tmp_path, dense_pair):
        _, _, pa, _ = dense_pair
        out = pa.parent / "a.lrfb"
        assert main(["svd", str(pa), str(out), "--rank", "3"]) == EXIT_OK
        assert read_factors(out).rank == 3

    def test_multiply_dense_fp64_matches_reference(self, tmp_path, dense_pair):
        a, b, pa, pb = dense_pair
        out_path = tmp_path / "c.lrgm"
        assert main(["multiply", str(pa), str(pb), str(out_path)]) == EXIT_OK
        assert np.array_equal(read_matrix(out_path).matrix.data, matmul_reference(a, b).data)

    def test_multiply_dense_fp8_path(self, tmp_path, dense_pair):
        a, b, pa, pb = dense_pair
        out_path = tmp_path / "c8.lrgm"
        assert main(["multiply", str(pa), str(pb), str(out_path), "--precision", "fp8"]) == EXIT_OK
        produced = read_matrix(out_path).matrix
        rel = np.linalg.norm(produced.data - (a.data @ b.data)) / np.linalg.norm(a.data @ b.data)
        assert rel < 0.1

    def test_multiply_mixed_bundle_and_dense(self, tmp_path, dense_pair):
        a, b, pa, pb = dense_pair
        bundle = tmp_path / "a.lrfb"
        assert main(["svd", str(pa), str(bundle), "--rank", "12"]) == EXIT_OK
        out_path = tmp_path / "mixed.lrgm"
        assert main(["multiply", str(bundle), str(pb), str(out_path)]) == EXIT_OK
        produced = read_matrix(out_path).matrix
        rel = np.linalg.norm(produced.data - (a.data @ b.data)) / np.linalg.norm(a.data @ b.data)
        assert rel < 1e-9


class TestQuantizeCommand:
    def test_quantize_writes_fp8_container(self, tmp_path, dense_pair):
        _, _, pa, _ = dense_pair
        out = tmp_path / "q.lrgm"
        assert main(["quantize", str(pa), str(out), "--format", "e4m3"]) == EXIT_OK
        loaded = read_matrix(out)
        assert loaded.scale is not None
        assert loaded.matrix.precision.value == "fp8"

    def test_e5m2_selectable(self, tmp_path, dense_pair):
        _, _, pa, _ = dense_pair
        out = tmp_path / "q5.lrgm"
        assert main(["quantize", str(pa), str(out), "--format", "e5m2"]) == EXIT_OK

    def test_quantized_file_feeds_multiply(self, tmp_path, dense_pair):
        # fp8-tagged containers hold dequantized values, so downstream
        # commands consume them like any dense matrix.
        a, b, pa, pb = dense_pair
        qa = tmp_path / "qa.lrgm"
        assert main(["quantize", str(pa), str(qa)]) == EXIT_OK
        out = tmp_path / "qprod.lrgm"
        assert main(["multiply", str(qa), str(pb), str(out)]) == EXIT_OK
        produced = read_matrix(out).matrix
        exact = a.data @ b.data
        rel = np.linalg.norm(produced.data - exact) / np.linalg.norm(exact)
        assert rel < 0.1


class TestBenchCommand:
    def test_bench_with_config_csv_and_plots(self, tmp_path, capsys):
        config = tmp_path / "bench.cfg"
        config.write_text(
            "sizes = 64\n"
            "methods = direct_fp32, lowrank_auto\n"
            "warmup_iters = 0\n"
            "measure_iters = 1\n"
            "seed = 5\n"
        )
        out_csv = tmp_path / "out.csv"
        plots = tmp_path / "plots"
        code = main(
            ["bench", "--config", str(config), "--out-csv", str(out_csv), "--plots", str(plots)]
        )
        assert code == EXIT_OK
        records = parse_csv(out_csv)
        assert {r.method.value for r in records} == {"direct_fp32", "lowrank_auto"}
        assert (plots / "speedup.svg").exists()

    def test_verification_failure_exit_code(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text(
            "sizes = 32\nmethods = lowrank_fp8\nwarmup_iters = 0\nmeasure_iters = 1\n"
            "rank_policy = error:0.000001\n"
        )
        assert main(["bench", "--config", str(config)]) == EXIT_VERIFICATION

    def test_bad_config_is_usage_error(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("threads = 9\n")
        assert main(["bench", "--config", str(config)]) == EXIT_USAGE


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert main(["model", "--wat"]) == EXIT_USAGE

    def test_missing_input_is_io_error(self, tmp_path):
        assert main(["svd", str(tmp_path / "nope.lrgm"), str(tmp_path / "o.lrfb")]) == EXIT_IO

    def test_corrupt_input_is_io_error(self, tmp_path):
        bad = tmp_path / "bad.lrgm"
        bad.write_bytes(b"garbage bytes")
        assert main(["svd", str(bad), str(tmp_path / "o.lrfb")]) == EXIT_IO

    def test_bad_policy_is_usage_error(self, tmp_path, dense_pair):
        _, _, pa, _ = dense_pair
        assert main(["svd", str(pa), str(tmp_path / "o.lrfb"), "--policy", "energy:2"]) == (
            EXIT_USAGE
        )
