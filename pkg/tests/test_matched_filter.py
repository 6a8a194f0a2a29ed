import math

import numpy as np
import pytest

from kernelizer.errors import InvalidPrecisionError, PreconditionError, ShapeMismatchError, ZeroPivotError
from kernelizer.matched_filter import (
    DemodReport,
    FilterBankConfig,
    MatchedFilterReceiver,
    build_synthetic_bank,
    demodulate,
    demodulate_dense,
    demodulate_grouped,
    normalize_rows,
    prepare_bank,
    split_by_symbol,
    transmit,
)
from kernelizer.tensor_core import reconstruct


@pytest.fixture
def bank_cfg():
    return FilterBankConfig(bits_per_symbol=1, sequence_length=2, variants=1, samples_per_symbol=4)


@pytest.fixture
def bank(bank_cfg):
    return prepare_bank(build_synthetic_bank(bank_cfg, seed=3), bank_cfg.precision)


def complex_window(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


class TestConfig:
    def test_dimensions(self):
        cfg = FilterBankConfig(bits_per_symbol=2, sequence_length=2, variants=1, samples_per_symbol=1)
        assert (cfg.rows, cfg.columns) == (16, 2)
        assert cfg.alphabet_size == 4
        assert cfg.rows_per_symbol == 4

    def test_variants_multiply_rows(self):
        cfg = FilterBankConfig(bits_per_symbol=1, sequence_length=1, variants=3, samples_per_symbol=5)
        assert (cfg.rows, cfg.columns, cfg.rows_per_symbol) == (6, 5, 3)

    def test_invalid(self):
        with pytest.raises(PreconditionError):
            FilterBankConfig(variants=0)
        with pytest.raises(InvalidPrecisionError):
            FilterBankConfig(precision=0)


class TestNormalization:
    def test_first_column(self):
        out = normalize_rows([[2, 4], [1j, 1]])
        assert out.tolist() == [[1, 2], [1, -1j]]

    def test_other_pivot(self):
        assert normalize_rows([[2, 4]], pivot_col=2).tolist() == [[0.5, 1]]

    def test_zero_pivot_names_row(self):
        with pytest.raises(ZeroPivotError, match="row 2"):
            normalize_rows([[1, 2], [0, 3]])

    def test_pivot_out_of_range(self):
        with pytest.raises(ShapeMismatchError):
            normalize_rows([[1, 2]], pivot_col=3)

    def test_prepared_bank_pivot_is_one(self, bank):
        assert np.all(reconstruct(bank).values[:, 0] == 1)


class TestSyntheticBank:
    def test_shape_and_norm(self, bank_cfg):
        raw = build_synthetic_bank(bank_cfg)
        assert raw.shape == (4, 8)
        assert np.allclose(np.linalg.norm(raw, axis=1), 1)

    def test_deterministic(self, bank_cfg):
        assert np.array_equal(build_synthetic_bank(bank_cfg, 5), build_synthetic_bank(bank_cfg, 5))
        assert not np.array_equal(build_synthetic_bank(bank_cfg, 5), build_synthetic_bank(bank_cfg, 6))

    def test_coarse_rounding_shrinks_kernel(self, bank_cfg):
        raw = build_synthetic_bank(bank_cfg)
        coarse = prepare_bank(raw, 1.0)
        assert coarse.kernel_size <= 9
        assert coarse.kernel_size <= prepare_bank(raw, 1e-3).kernel_size

    def test_transmit(self):
        sent = transmit(np.array([[1j, 2], [3, 4j]]), [2, 1])
        assert sent.tolist() == [3, -4j, -1j, 2]
        assert transmit(np.eye(2), []).size == 0


class TestDecisions:
    def test_self_match(self, bank, bank_cfg):
        dense = reconstruct(bank).values
        for m in range(1, bank_cfg.rows + 1):
            report = demodulate(bank, np.conj(dense[m - 1]), bank_cfg.bits_per_symbol)
            assert report.argmax_row == m
            assert report.symbol == math.ceil(m / bank_cfg.rows_per_symbol)
            assert abs(report.phase) < 1e-9
            assert not report.no_decision

    def test_tie_goes_to_lowest_row(self):
        bank = prepare_bank(np.array([[1, 1], [1, 1]]), 1, pivot_col=None)
        report = demodulate(bank, [1, 1])
        assert (report.argmax_row, report.symbol) == (1, 1)

    def test_zero_window(self, bank):
        report = demodulate(bank, np.zeros(8))
        assert report.no_decision
        assert report == DemodReport.undecided()

    def test_finite_snr(self):
        bank = prepare_bank(np.array([[1, 0], [0, 1]]), 1, pivot_col=None)
        report = demodulate(bank, [1, 0.5])
        assert report.argmax_row == 1
        assert report.power == pytest.approx(1.0)
        assert report.snr == pytest.approx(1 / (math.sqrt(1.25) - 1))

    def test_perfect_match_snr_is_inf(self):
        bank = prepare_bank(np.array([[1, 0], [0, 1]]), 1, pivot_col=None)
        report = demodulate(bank, [1, 0])
        assert math.isinf(report.snr)
        assert report.to_json()["snr"] == "inf"

    def test_phase(self):
        bank = prepare_bank(np.array([[1, 0], [0, 1]]), 1, pivot_col=None)
        report = demodulate(bank, [1j, 0])
        assert report.phase == pytest.approx(math.pi / 2)

    def test_whole_alphabet_one_symbol(self, bank):
        assert demodulate(bank, np.ones(8), bits_per_symbol=0).symbol == 1

    def test_rows_not_grouped(self):
        bank = prepare_bank(np.ones((3, 2)), 1, pivot_col=None)
        with pytest.raises(ShapeMismatchError):
            demodulate(bank, [1, 1], bits_per_symbol=1)

    def test_factored_matches_dense(self, bank, rng):
        dense = reconstruct(bank).values
        for _ in range(50):
            window = complex_window(rng, 8)
            fast = demodulate(bank, window)
            slow = demodulate_dense(dense, window)
            assert (fast.argmax_row, fast.symbol) == (slow.argmax_row, slow.symbol)
            assert fast.power == pytest.approx(slow.power)
            assert fast.phase == pytest.approx(slow.phase)


class TestGrouped:
    def test_matches_flat(self, bank, rng):
        groups = split_by_symbol(bank, 1)
        assert [g.shape for g in groups] == [(2, 8), (2, 8)]
        for _ in range(30):
            window = complex_window(rng, 8)
            flat, grouped = demodulate(bank, window), demodulate_grouped(groups, window)
            assert (grouped.argmax_row, grouped.symbol) == (flat.argmax_row, flat.symbol)
            assert grouped.power == pytest.approx(flat.power)

    def test_single_group(self, bank):
        report = demodulate_grouped([bank], np.conj(reconstruct(bank).values[2]))
        assert (report.symbol, report.argmax_row) == (1, 3)

    def test_tie_goes_to_lowest_group(self):
        sub = prepare_bank(np.array([[1, 1]]), 1, pivot_col=None)
        report = demodulate_grouped([sub, sub], [1, 1])
        assert (report.symbol, report.argmax_row) == (1, 1)

    def test_zero_window(self, bank):
        assert demodulate_grouped(split_by_symbol(bank, 1), np.zeros(8)).no_decision


class TestReceiver:
    def test_recovers_sequence(self, bank, bank_cfg):
        sent = [3, 1, 4, 2, 2]
        receiver = MatchedFilterReceiver(bank, bank_cfg.bits_per_symbol)
        reports = receiver.run(transmit(reconstruct(bank).values, sent))
        assert [received for received, _ in reports] == [8, 16, 24, 32, 40]
        assert [r.argmax_row for _, r in reports] == sent
        assert [r.symbol for _, r in reports] == [2, 1, 2, 1, 1]
        assert receiver.muls < len(sent) * bank_cfg.rows * bank_cfg.columns ** 2

    def test_stride_one(self, bank):
        receiver = MatchedFilterReceiver(bank, stride=1)
        reports = receiver.run(transmit(reconstruct(bank).values, [1, 2]))
        assert len(reports) == 16 - 8 + 1
        assert reports[-1][1].argmax_row == 2

    def test_callback(self, bank):
        seen = []
        receiver = MatchedFilterReceiver(bank, on_report=lambda n, r: seen.append((n, r.argmax_row)))
        receiver.run(transmit(reconstruct(bank).values, [4]))
        assert seen == [(8, 4)]

    def test_short_stream_reports_nothing(self, bank):
        assert MatchedFilterReceiver(bank).run(np.ones(5)) == []

    def test_matches_one_shot(self, bank, rng):
        stream = complex_window(rng, 24)
        reports = MatchedFilterReceiver(bank).run(stream)
        for received, report in reports:
            one_shot = demodulate(bank, stream[received - 8:received])
            assert report.argmax_row == one_shot.argmax_row
            assert report.power == pytest.approx(one_shot.power)
