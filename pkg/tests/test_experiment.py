import logging

import numpy as np
import pandas as pd

from kernelizer import experiment
from kernelizer.experiment import (
    generate_matrix,
    measure_counts,
    plot_reduction,
    run_count_experiments,
    run_synthesis_experiments,
    save_results,
)
from kernelizer.factored_multiply import matvec_factored
from kernelizer.naive import naive_matvec
from kernelizer.tensor_core import as_tensor, factorize
from utils.helpers import compare_algorithms, timer


class TestGenerateMatrix:
    def test_shape_and_alphabet(self):
        t = generate_matrix(10, 6, kernel_size=3, seed=1)
        assert t.shape == (10, 6)
        assert len(set(t.ravel().tolist()) - {0}) <= 3

    def test_reproducible(self):
        assert np.array_equal(generate_matrix(5, 5, 2, seed=9), generate_matrix(5, 5, 2, seed=9))

    def test_no_unit_values(self):
        t = generate_matrix(20, 8, kernel_size=5, density=1.0)
        assert np.all(t >= 2)


class TestCounts:
    def test_three_modes(self):
        t = generate_matrix(16, 8, kernel_size=2, density=1.0, seed=3)
        records = measure_counts(t, np.arange(2, 10))
        assert [r['mode'] for r in records] == ['direct', 'recursive', 'iterative']
        direct = records[0]
        assert direct['naive_muls'] == 16 * 8
        assert direct['factored_muls'] == direct['kernel_size'] * 8
        assert direct['c_mul'] <= direct['kernel_size'] / 16

    def test_sweep_summary(self, capsys):
        df = run_count_experiments([8, 16], [2], cols=4, num_trials=2)
        assert set(df['mode']) == {'direct', 'recursive', 'iterative'}
        assert len(df) >= 6
        assert (df['l_over_m'] == df['kernel_size'] / df['rows']).all()

    def test_sweeps_log_elapsed_time(self, capsys, caplog):
        with caplog.at_level(logging.DEBUG, logger='utils.helpers'):
            run_count_experiments([4], [2], cols=4, num_trials=1)
            run_synthesis_experiments([(3, 3)], num_trials=1)
        assert 'run_count_experiments took' in caplog.text
        assert 'run_synthesis_experiments took' in caplog.text

    def test_synthesis_sharing(self, capsys):
        df = run_synthesis_experiments([(4, 4)], num_trials=3)
        assert len(df) == 3
        assert (df['combinations'] <= df['unshared_adds']).all()
        assert (df['delta'] == 0).all()


class TestOutputs:
    def test_save_results(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(experiment, 'RESULTS_DIR', str(tmp_path / 'results'))
        path = save_results(pd.DataFrame({'a': [1, 2]}), 'x.csv')
        assert pd.read_csv(path)['a'].tolist() == [1, 2]

    def test_plot_reduction(self, tmp_path, capsys):
        df = run_count_experiments([8], [2], cols=4, num_trials=1)
        target = tmp_path / 'reduction.png'
        plot_reduction(df, str(target))
        assert target.stat().st_size > 0


class TestHelpers:
    def test_compare_algorithms_agree(self):
        t = generate_matrix(12, 12, 3)
        f = factorize(as_tensor(t))
        outcome = compare_algorithms(lambda v: matvec_factored(f, v), lambda v: naive_matvec(t, v),
                                     np.arange(12))
        assert outcome['agree']
        assert outcome['factored_time'] >= 0

    def test_compare_algorithms_disagree(self, caplog):
        with caplog.at_level(logging.WARNING, logger='utils.helpers'):
            outcome = compare_algorithms(lambda x: x, lambda x: x + 1, np.arange(3))
        assert not outcome['agree']
        assert 'differ' in caplog.text

    def test_timer_keeps_result(self, caplog):
        @timer
        def double(x):
            return 2 * x

        with caplog.at_level(logging.DEBUG, logger='utils.helpers'):
            assert double(4) == 8
        assert 'double took' in caplog.text
