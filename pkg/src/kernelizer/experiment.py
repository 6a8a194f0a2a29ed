"""
Experimental validation of the factored products.

This script measures:
- Multiplication and addition counts of direct, recursive and iterative
  factored matvec against the schoolbook products
- Reduction ratios C+ and C* as functions of kernel size L and row count M
- Runtimes with multi-trial averaging and reproducible seeds
- Scheme synthesis: shared adders per step vs the unshared factored form

Results are written to CSV and summarized in figures.
"""

import logging
import os
import platform
import sys
from datetime import datetime
from typing import List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from kernelizer.factored_multiply import (
    ProductWindow,
    iterative_matvec_step,
    matvec_factored,
    op_ratios,
    recursive_matvec,
)
from kernelizer.naive import naive_matvec, naive_recursive_matvec, naive_sliding
from kernelizer.scheme import SynthesisConfig, synthesize, unshared_adds
from kernelizer.tensor_core import as_tensor, factorize
from utils.helpers import compare_algorithms, timer

logger = logging.getLogger(__name__)

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.abspath(os.path.join(SCRIPT_DIR, '..', '..'))
FIGURES_DIR = os.path.join(PROJECT_ROOT, 'report', 'figures')
RESULTS_DIR = os.path.join(PROJECT_ROOT, 'experiments', 'results')


# ============================================================================
# TEST DATA
# ============================================================================

def generate_matrix(rows: int, cols: int, kernel_size: int, density: float = 0.7,
                    seed: int = 42) -> np.ndarray:
    """
    Random integer matrix drawing its nonzeros from `kernel_size` distinct values.

    Args:
        rows, cols: Matrix shape
        kernel_size: Number of distinct nonzero values (upper bound on L)
        density: Probability of an element being nonzero
        seed: Random seed

    Returns:
        rows x cols int64 matrix
    """
    rng = np.random.default_rng(seed)
    alphabet = rng.choice(np.arange(2, 2 + 4 * kernel_size), size=kernel_size, replace=False)
    values = rng.choice(alphabet, size=(rows, cols))
    mask = rng.random((rows, cols)) < density
    return np.where(mask, values, 0).astype(np.int64)


# ============================================================================
# OPERATION-COUNT EXPERIMENTS
# ============================================================================

def measure_counts(t: np.ndarray, v: np.ndarray) -> List[dict]:
    """Factored vs naive counts of the three matvec modes on one instance."""
    f = factorize(as_tensor(t))
    rows = []

    cost = matvec_factored(f, v)[1]
    naive = naive_matvec(t, v)[1]
    rows.append(("direct", cost, naive))

    cost = recursive_matvec(f, v)[1]
    naive = naive_recursive_matvec(t, v)[1]
    rows.append(("recursive", cost, naive))

    window = ProductWindow.cold(f)
    step_cost = None
    for sample in v:
        _, window, step = iterative_matvec_step(window, f, sample)
        step_cost = step if step_cost is None else step_cost + step
    naive = naive_sliding(t, v)[1]
    rows.append(("iterative", step_cost, naive))

    records = []
    for mode, cost, naive in rows:
        c_add, c_mul = op_ratios(cost, naive)
        records.append({
            'mode': mode,
            'rows': t.shape[0],
            'cols': t.shape[1],
            'kernel_size': f.kernel_size,
            'factored_muls': cost.muls,
            'factored_adds': cost.adds,
            'naive_muls': naive.muls,
            'naive_adds': naive.adds,
            'c_mul': float(c_mul) if c_mul is not None else np.nan,
            'c_add': float(c_add) if c_add is not None else np.nan,
        })
    return records


@timer
def run_count_experiments(row_counts: List[int], kernel_sizes: List[int], cols: int = 16,
                          num_trials: int = 5, base_seed: int = 42) -> pd.DataFrame:
    """
    Sweep matrix heights and kernel sizes; average counts over trials.

    Returns:
        DataFrame with one row per (mode, rows, kernel size)
    """
    records = []
    for rows in row_counts:
        for kernel_size in kernel_sizes:
            print(f"Testing {rows}x{cols}, L<={kernel_size}...")
            for trial in range(num_trials):
                seed = base_seed + trial
                t = generate_matrix(rows, cols, kernel_size, seed=seed)
                v = np.random.default_rng(seed + 1000).integers(2, 10, size=cols)
                for record in measure_counts(t, v):
                    record['trial'] = trial
                    records.append(record)

    df = pd.DataFrame(records)
    summary = (df.groupby(['mode', 'rows', 'kernel_size'], as_index=False)
                 .agg(c_mul=('c_mul', 'mean'), c_add=('c_add', 'mean'),
                      factored_muls=('factored_muls', 'mean'), naive_muls=('naive_muls', 'mean')))
    summary['l_over_m'] = summary['kernel_size'] / summary['rows']
    return summary


def run_runtime_experiments(sizes: List[int], kernel_size: int = 4, num_trials: int = 5,
                            base_seed: int = 42) -> pd.DataFrame:
    """Direct-matvec runtimes of factored vs naive for square matrices."""
    results = []
    for size in sizes:
        print(f"Testing size {size}...")
        factored_times, naive_times = [], []
        for trial in range(num_trials):
            seed = base_seed + trial
            t = generate_matrix(size, size, kernel_size, seed=seed)
            v = np.random.default_rng(seed).integers(-9, 10, size=size)
            f = factorize(as_tensor(t))
            outcome = compare_algorithms(lambda x: matvec_factored(f, x), lambda x: naive_matvec(t, x), v)
            if not outcome['agree']:
                raise AssertionError(f"factored and naive matvec differ at size {size}")
            factored_times.append(outcome['factored_time'])
            naive_times.append(outcome['naive_time'])

        results.append({
            'size': size,
            'avg_factored': np.mean(factored_times),
            'std_factored': np.std(factored_times),
            'avg_naive': np.mean(naive_times),
            'std_naive': np.std(naive_times),
        })
        print(f"  Factored: {np.mean(factored_times):.6f}s, naive: {np.mean(naive_times):.6f}s")
    return pd.DataFrame(results)


@timer
def run_synthesis_experiments(shapes: List[tuple], kernel_size: int = 3, num_trials: int = 5,
                              base_seed: int = 42) -> pd.DataFrame:
    """Shared adders per step (combinations) vs unshared factored additions."""
    records = []
    for rows, cols in shapes:
        for trial in range(num_trials):
            t = generate_matrix(rows, cols, kernel_size, seed=base_seed + trial)
            scheme = synthesize(t, SynthesisConfig())
            records.append({
                'rows': rows,
                'cols': cols,
                'trial': trial,
                'combinations': scheme.combinations,
                'unshared_adds': unshared_adds(factorize(as_tensor(t))),
                'delta': scheme.delta,
            })
    return pd.DataFrame(records)


# ============================================================================
# VISUALIZATIONS
# ============================================================================

def plot_reduction(df: pd.DataFrame, save_path: Optional[str] = None):
    """C* against L/M per mode, with the L/M reference line."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 6))

    for mode, marker in [('direct', 'o'), ('recursive', 's'), ('iterative', 'D')]:
        part = df[df['mode'] == mode].sort_values('l_over_m')
        ax1.plot(part['l_over_m'], part['c_mul'], marker=marker, linestyle='none', label=mode)
    ref = np.linspace(0, df['l_over_m'].max(), 50)
    ax1.plot(ref, ref, '--', color='red', label='C* = L/M')
    ax1.set_xlabel('L / M', fontsize=12)
    ax1.set_ylabel('C* (factored / naive multiplications)', fontsize=12)
    ax1.set_title('Multiplication Reduction', fontsize=14, fontweight='bold')
    ax1.grid(True, alpha=0.3)
    ax1.legend()

    for mode in ['direct', 'recursive', 'iterative']:
        part = df[df['mode'] == mode].groupby('rows')['c_add'].mean()
        ax2.plot(part.index, part.values, marker='o', label=mode)
    ax2.set_xlabel('Rows (M)', fontsize=12)
    ax2.set_ylabel('C+ (factored / naive additions)', fontsize=12)
    ax2.set_title('Addition Ratio', fontsize=14, fontweight='bold')
    ax2.grid(True, alpha=0.3)
    ax2.legend()

    plt.tight_layout()
    if save_path:
        plt.savefig(save_path, dpi=300, bbox_inches='tight')
        print(f"📊 Reduction plot saved to {save_path}")
    plt.close()


def plot_runtime(df: pd.DataFrame, save_path: Optional[str] = None):
    fig, ax = plt.subplots(figsize=(8, 6))
    ax.errorbar(df['size'], df['avg_factored'], yerr=df['std_factored'], marker='o', capsize=5,
                label='Factored', color='green', linewidth=2)
    ax.errorbar(df['size'], df['avg_naive'], yerr=df['std_naive'], marker='s', capsize=5,
                label='Naive', color='gray', linewidth=2)
    ax.set_xlabel('Matrix size (n x n)', fontsize=12)
    ax.set_ylabel('Runtime (seconds)', fontsize=12)
    ax.set_title('Direct Matvec Runtime', fontsize=14, fontweight='bold')
    ax.set_xscale('log')
    ax.set_yscale('log')
    ax.grid(True, alpha=0.3)
    ax.legend()

    plt.tight_layout()
    if save_path:
        plt.savefig(save_path, dpi=300, bbox_inches='tight')
        print(f"📊 Runtime plot saved to {save_path}")
    plt.close()


# ============================================================================
# SAVE RESULTS
# ============================================================================

def save_results(df: pd.DataFrame, filename: str = 'kernelizer_results.csv') -> str:
    """Save experimental results to CSV."""
    os.makedirs(RESULTS_DIR, exist_ok=True)
    filepath = os.path.join(RESULTS_DIR, filename)
    df.to_csv(filepath, index=False)
    print(f"💾 Results saved to {filepath}")
    return filepath


def log_environment():
    """Log machine specs and environment for reproducibility."""
    print("\n" + "=" * 70)
    print("ENVIRONMENT SPECIFICATIONS (for reproducibility)")
    print("=" * 70)
    print(f"Date/Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"Python: {platform.python_version()}")
    print(f"OS: {platform.system()} {platform.release()}")
    print(f"Machine: {platform.machine()}")
    print(f"NumPy: {np.__version__}")
    print(f"Pandas: {pd.__version__}")
    print(f"Matplotlib: {matplotlib.__version__}")
    print(f"Random Seed: 42 (base)")
    print("=" * 70 + "\n")


if __name__ == "__main__":
    print("=" * 70)
    print("FACTORED PRODUCTS - EXPERIMENTAL VALIDATION")
    print("=" * 70)
    log_environment()
    os.makedirs(FIGURES_DIR, exist_ok=True)

    print("\n📊 EXPERIMENT 1: Operation Counts")
    print("=" * 70)
    counts = run_count_experiments([8, 16, 32, 64], [2, 4, 8])
    save_results(counts, 'operation_counts.csv')
    plot_reduction(counts, os.path.join(FIGURES_DIR, 'reduction.png'))

    print("\n📊 EXPERIMENT 2: 64x16 matrix, 4 distinct values")
    print("=" * 70)
    t = generate_matrix(64, 16, 4, density=1.0)
    v = np.arange(2, 18)
    record = measure_counts(t, v)[0]
    print(f"  C* = {record['factored_muls']}/{record['naive_muls']} = {record['c_mul']:.4f} "
          f"(bound L/M = {record['kernel_size'] / 64:.4f})")

    print("\n📊 EXPERIMENT 3: Runtime")
    print("=" * 70)
    runtimes = run_runtime_experiments([16, 32, 64, 128, 256])
    save_results(runtimes, 'runtimes.csv')
    plot_runtime(runtimes, os.path.join(FIGURES_DIR, 'runtime.png'))

    print("\n📊 EXPERIMENT 4: Shared adders")
    print("=" * 70)
    synthesis = run_synthesis_experiments([(4, 4), (8, 6), (16, 8)])
    save_results(synthesis, 'synthesis.csv')
    print(synthesis.groupby(['rows', 'cols'])[['combinations', 'unshared_adds', 'delta']].mean())

    print("\n✅ All experiments complete")
