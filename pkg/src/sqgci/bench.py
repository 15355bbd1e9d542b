"""Microbenchmark for the hot kernels: JIT dispatch vs plain numpy.

Run as `python -m sqgci.bench`. Compares the active implementation
(numba unless SQGCI_NUMBA=0 or numba is missing) against the numpy
reference for the three kernels that dominate symbol assembly.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels


def _best(fn, *args, repeats: int = 5) -> float:
    out = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        out = min(out, time.perf_counter() - t0)
    return out


def main():
    rng = np.random.default_rng(0)
    print(f"numba active: {kernels.HAVE_NUMBA}")

    r = rng.uniform(0.0, 1.5, size=(2048, 2048))
    K = 512
    z = rng.standard_normal((2 * K + 1, 2 * K + 1)) \
        + 1j * rng.standard_normal((2 * K + 1, 2 * K + 1))
    z = 0.5 * (z + np.conj(z[::-1, ::-1]))

    # warm the JIT outside the timed region
    kernels.cutoff_profile(r[:4, :4].copy())
    kernels.t_symbols(64, 3, 4, 5, 8)
    kernels.hermitian_violation(z[:9, :9].copy())

    cases = (
        ("cutoff_profile 2048^2", kernels.cutoff_profile,
         kernels.cutoff_profile_numpy, (r,)),
        (f"t_symbols lam=4096 K={K}", kernels.t_symbols,
         kernels.t_symbols_numpy, (4096, 3, 4, 5, K)),
        (f"hermitian_violation K={K}", kernels.hermitian_violation,
         kernels.hermitian_violation_numpy, (z,)),
    )
    print(f"{'kernel':<28}{'active [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for name, active, ref, args in cases:
        ta = _best(active, *args)
        tr = _best(ref, *args)
        print(f"{name:<28}{ta * 1e3:>12.2f}{tr * 1e3:>12.2f}{tr / ta:>9.2f}")


if __name__ == "__main__":
    main()
