"""
Common utility functions for the experiment runner and the CLI.
"""

import functools
import logging
import time
from typing import Any, Callable, Dict

import numpy as np

logger = logging.getLogger(__name__)


def timer(func: Callable) -> Callable:
    """
    Decorator to measure execution time of a function.

    Args:
        func: Function to time

    Returns:
        Wrapped function that logs its execution time at DEBUG level
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = func(*args, **kwargs)
        end = time.perf_counter()
        logger.debug("%s took %.6f seconds", func.__name__, end - start)
        return result
    return wrapper


def _first(result: Any) -> Any:
    # products return (value, OpCount); compare values only
    return result[0] if isinstance(result, tuple) else result


def compare_algorithms(factored: Callable, naive: Callable, test_data: Any,
                       rtol: float = 1e-9) -> Dict[str, Any]:
    """
    Compare runtime and results of a factored product and its naive oracle.

    Args:
        factored: Callable taking test_data
        naive: Callable taking test_data
        test_data: Argument passed to both
        rtol: Relative tolerance for float results

    Returns:
        Dict with both runtimes, the speedup (naive / factored) and whether
        the results agree
    """
    start1 = time.perf_counter()
    result1 = factored(test_data)
    time1 = time.perf_counter() - start1

    start2 = time.perf_counter()
    result2 = naive(test_data)
    time2 = time.perf_counter() - start2

    a, b = np.asarray(_first(result1)), np.asarray(_first(result2))
    if np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer):
        agree = a.shape == b.shape and bool(np.array_equal(a, b))
    else:
        agree = a.shape == b.shape and bool(np.allclose(a, b, rtol=rtol, atol=0))

    speedup = time2 / time1 if time1 > 0 else float("inf")
    logger.info("factored %.6fs, naive %.6fs, speedup %.2fx, agree=%s", time1, time2, speedup, agree)
    if not agree:
        logger.warning("factored and naive results differ")
    return {"factored_time": time1, "naive_time": time2, "speedup": speedup, "agree": agree}
